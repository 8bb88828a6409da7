#pragma once

#include <fkpath/fkpath.hpp>

#include <gtest/gtest.h>

namespace fkt {

using fkpath::Mat;
using fkpath::Vec;

inline Vec v(std::initializer_list<double> xs) {
    Vec out(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) out[i++] = x;
    return out;
}

inline fkpath::DiffusionSpec spec_of(int M, fkpath::DriftFn b, fkpath::SigmaFn s, fkpath::PotentialFn u = {}) {
    fkpath::DiffusionSpec d;
    d.dim = M;
    d.drift = std::move(b);
    d.sigma = std::move(s);
    d.potential = std::move(u);
    return d;
}

inline fkpath::DiffusionSpec unit(int M, fkpath::DriftFn b, fkpath::PotentialFn u = {}) {
    return spec_of(M, std::move(b), [M](const Vec&, Mat& s) { s.setIdentity(M, M); }, std::move(u));
}

inline fkpath::DiffusionSpec brownian(int M) {
    return unit(M, [M](const Vec&, Vec& b) { b.setZero(M); });
}

inline fkpath::DiffusionSpec ou(double theta) {
    return unit(1, [theta](const Vec& x, Vec& b) { b = -theta * x; });
}

// dx = b x dt + x dw
inline fkpath::DiffusionSpec gbm(double b, bool analytic_partials = true) {
    auto s = spec_of(
        1, [b](const Vec& x, Vec& o) { o = b * x; },
        [](const Vec& x, Mat& m) {
            m.resize(1, 1);
            m(0, 0) = x[0];
        });
    if (analytic_partials) s.sigma_partials = [](const Vec&, std::vector<Mat>& d) { d.assign(1, Mat::Ones(1, 1)); };
    return s;
}

inline double mean_of(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

inline double var_of(const std::vector<double>& x) {
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

}  // namespace fkt

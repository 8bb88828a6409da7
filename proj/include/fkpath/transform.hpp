#pragma once

#include "core.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <memory>

namespace fkpath {

// d sigma / d x_l for every l, analytic if the spec has it
inline std::vector<Mat> sigma_partials_at(const DiffusionSpec& spec, const Vec& x,
                                          std::optional<double> step = std::nullopt) {
    const int M = spec.dim;
    std::vector<Mat> d(M, Mat::Zero(M, M));
    if (spec.sigma_partials) {
        spec.sigma_partials(x, d);
        return d;
    }
    const double h = detail::resolve_step(x, step);
    Vec z = x;
    Mat sp(M, M), sm(M, M);
    for (int l = 0; l < M; ++l) {
        z[l] = x[l] + h;
        spec.sigma(z, sp);
        z[l] = x[l] - h;
        spec.sigma(z, sm);
        z[l] = x[l];
        d[l] = (sp - sm) / (2 * h);
    }
    return d;
}

inline double condition_number(const Mat& s) {
    Eigen::JacobiSVD<Mat> svd(s);
    const Vec& sv = svd.singularValues();
    const double lo = sv.minCoeff(), hi = sv.maxCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

inline constexpr double kConditionLimit = 1e12;

// v_j = sum_{i,l} sigma_il d_i sigma_jl, i.e. sigma_il times the derivative
// along the l-th noise direction. For diagonal sigma this is sigma_jj d_j sigma_jj.
inline Vec noise_direction_derivative(const Mat& s, const std::vector<Mat>& ds) {
    const auto M = s.rows();
    Vec v = Vec::Zero(M);
    for (Eigen::Index i = 0; i < M; ++i) v.noalias() += ds[static_cast<std::size_t>(i)] * s.row(i).transpose();
    return v;
}

// Induced drift of y with dy = sigma^{-1} dx:  sigma^{-1}(b - v/2).
inline Vec transformed_drift(const DiffusionSpec& spec, const Vec& x, std::optional<double> step = std::nullopt) {
    Mat s = spec.sigma_at(x);
    const double cond = condition_number(s);
    if (!(cond < kConditionLimit))
        throw SingularDiffusion("transformed_drift: sigma is singular at " + detail::fmt_vec(x), cond);
    auto ds = sigma_partials_at(spec, x, step);
    Vec rhs = spec.drift_at(x) - 0.5 * noise_direction_derivative(s, ds);
    return s.partialPivLu().solve(rhs);
}

// ---- diagonal Lamperti chart -------------------------------------------------

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool contains(double x) const { return x > lo && x < hi; }
};

struct LampertiComponent {
    std::function<double(double)> sigma;
    Interval domain;
    double anchor = 0.0;
};

class DiagonalLamperti {
public:
    DiagonalLamperti() = default;
    explicit DiagonalLamperti(std::vector<LampertiComponent> comps) : c_(std::move(comps)) {
        for (std::size_t j = 0; j < c_.size(); ++j) {
            auto& c = c_[j];
            if (!c.domain.contains(c.anchor))
                throw DomainError("DiagonalLamperti: anchor outside domain for component " + std::to_string(j));
            const double s = c.sigma(c.anchor);
            if (!(s > 0.0))
                throw DomainError("DiagonalLamperti: sigma not positive at anchor of component " + std::to_string(j));
        }
    }

    // anchor 1 on positive domains, 0 otherwise
    static double default_anchor(const Interval& d) {
        if (d.lo >= 0.0) return d.lo < 1.0 && 1.0 < d.hi ? 1.0 : 0.5 * (d.lo + std::min(d.hi, d.lo + 2.0));
        return d.contains(0.0) ? 0.0 : 0.5 * (std::max(d.lo, d.hi - 2.0) + d.hi);
    }

    static DiagonalLamperti uniform(int M, std::function<double(double)> sigma, Interval d = {}) {
        std::vector<LampertiComponent> cs(static_cast<std::size_t>(M), LampertiComponent{sigma, d, default_anchor(d)});
        return DiagonalLamperti(std::move(cs));
    }

    int dim() const { return static_cast<int>(c_.size()); }
    const LampertiComponent& component(int j) const { return c_[static_cast<std::size_t>(j)]; }

    double map1(int j, double x) const {
        const auto& c = component(j);
        if (!c.domain.contains(x))
            throw DomainError("lamperti_map: x = " + std::to_string(x) + " outside domain of component " +
                              std::to_string(j));
        if (x == c.anchor) return 0.0;
        auto inv = [&](double xi) {
            const double s = c.sigma(xi);
            if (!(s > 0.0)) throw DomainError("lamperti_map: sigma not positive inside the domain");
            return 1.0 / s;
        };
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(inv, c.anchor, x, 15, 1e-10);
    }

    double inverse1(int j, double y) const {
        const auto& c = component(j);
        if (!std::isfinite(y)) throw DomainError("lamperti_inverse: non-finite y");
        if (y == 0.0) return c.anchor;
        auto F = [&](double x) { return map1(j, x) - y; };
        const double unit = 1.0 + std::abs(c.anchor);
        double near = c.anchor, far = c.anchor;
        bool found = false;
        const double dir = y > 0.0 ? 1.0 : -1.0;
        const double edge = dir > 0 ? c.domain.hi : c.domain.lo;
        double step = unit;
        for (int it = 0; it < 400; ++it) {
            double cand = c.anchor + dir * step;
            if (!(dir > 0 ? cand < edge : cand > edge)) cand = 0.5 * (far + edge);
            if (cand == far) break;
            far = cand;
            if (dir * F(far) >= 0.0) {
                found = true;
                break;
            }
            near = far;
            step *= 2.0;
        }
        if (!found)
            throw InversionError("lamperti_inverse: could not bracket y = " + std::to_string(y) +
                                 " for component " + std::to_string(j));
        double a = std::min(near, far), b = std::max(near, far);
        double fa = F(a), fb = F(b);
        if (fa == 0.0) return a;
        if (fb == 0.0) return b;
        std::uintmax_t iters = 200;
        auto r = boost::math::tools::toms748_solve(F, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52), iters);
        double x = 0.5 * (r.first + r.second);
        // polish: F' = 1/sigma
        for (int k = 0; k < 2; ++k) {
            const double xn = x - F(x) * c.sigma(x);
            if (!c.domain.contains(xn) || !std::isfinite(xn)) break;
            x = xn;
        }
        return x;
    }

private:
    std::vector<LampertiComponent> c_;
};

inline Vec lamperti_map(const DiagonalLamperti& dl, const Vec& x) {
    if (x.size() != dl.dim()) throw DomainError("lamperti_map: dimension mismatch");
    Vec y(x.size());
    for (int j = 0; j < dl.dim(); ++j) y[j] = dl.map1(j, x[j]);
    return y;
}

inline Vec lamperti_inverse(const DiagonalLamperti& dl, const Vec& y) {
    if (y.size() != dl.dim()) throw DomainError("lamperti_inverse: dimension mismatch");
    Vec x(y.size());
    for (int j = 0; j < dl.dim(); ++j) x[j] = dl.inverse1(j, y[j]);
    return x;
}

// y-space spec with unit diffusion. General but slow: each evaluation inverts
// the chart and differentiates sigma.
inline DiffusionSpec lamperti_spec(const DiffusionSpec& spec, const DiagonalLamperti& dl) {
    if (dl.dim() != spec.dim) throw DomainError("lamperti_spec: dimension mismatch");
    DiffusionSpec out;
    out.dim = spec.dim;
    out.name = spec.name.empty() ? "lamperti" : spec.name + "/lamperti";
    out.drift = [spec, dl](const Vec& y, Vec& b) { b = transformed_drift(spec, lamperti_inverse(dl, y)); };
    out.sigma = [](const Vec& y, Mat& s) { s.setIdentity(y.size(), y.size()); };
    if (spec.potential)
        out.potential = [spec, dl](const Vec& y) { return spec.potential(lamperti_inverse(dl, y)); };
    return out;
}

// ---- degenerate split ----------------------------------------------------------

struct DegenerateSplit {
    DiffusionSpec full;
    std::vector<int> stochastic;     // indices with noise
    std::vector<int> deterministic;  // indices with dx = b dt

    int m() const { return static_cast<int>(stochastic.size()); }

    Vec deterministic_drift(const Vec& x) const {
        Vec b = full.drift_at(x);
        Vec out(static_cast<Eigen::Index>(deterministic.size()));
        for (std::size_t k = 0; k < deterministic.size(); ++k) out[static_cast<Eigen::Index>(k)] = b[deterministic[k]];
        return out;
    }

    Vec restrict(const Vec& x) const {
        Vec z(static_cast<Eigen::Index>(stochastic.size()));
        for (std::size_t k = 0; k < stochastic.size(); ++k) z[static_cast<Eigen::Index>(k)] = x[stochastic[k]];
        return z;
    }

    // stochastic block with the deterministic coordinates frozen at `state`
    DiffusionSpec stochastic_spec(const Vec& state) const {
        if (deterministic.empty()) return full;
        DiffusionSpec s;
        s.dim = m();
        s.name = full.name + "/stochastic";
        auto idx = stochastic;
        auto f = full;
        auto lift = [idx, state](const Vec& z) {
            Vec x = state;
            for (std::size_t k = 0; k < idx.size(); ++k) x[idx[k]] = z[static_cast<Eigen::Index>(k)];
            return x;
        };
        s.drift = [f, idx, lift](const Vec& z, Vec& b) {
            Vec bf = f.drift_at(lift(z));
            b.resize(static_cast<Eigen::Index>(idx.size()));
            for (std::size_t k = 0; k < idx.size(); ++k) b[static_cast<Eigen::Index>(k)] = bf[idx[k]];
        };
        s.sigma = [f, idx, lift](const Vec& z, Mat& out) {
            Mat sf = f.sigma_at(lift(z));
            const auto m = static_cast<Eigen::Index>(idx.size());
            out.resize(m, m);
            for (Eigen::Index a = 0; a < m; ++a)
                for (Eigen::Index c = 0; c < m; ++c) out(a, c) = sf(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(c)]);
        };
        if (f.potential) s.potential = [f, lift](const Vec& z) { return f.potential(lift(z)); };
        return s;
    }

    // full drift rebuilt from the two halves
    Vec assemble_drift(const Vec& x) const {
        Vec out(full.dim);
        if (!stochastic.empty()) {
            Vec bs = stochastic_spec(x).drift_at(restrict(x));
            for (std::size_t k = 0; k < stochastic.size(); ++k) out[stochastic[k]] = bs[static_cast<Eigen::Index>(k)];
        }
        Vec bd = deterministic_drift(x);
        for (std::size_t k = 0; k < deterministic.size(); ++k) out[deterministic[k]] = bd[static_cast<Eigen::Index>(k)];
        return out;
    }
};

inline DegenerateSplit split_degenerate_indices(const DiffusionSpec& spec, std::vector<int> deterministic,
                                                const std::vector<Vec>& probes) {
    const int M = spec.dim;
    std::sort(deterministic.begin(), deterministic.end());
    deterministic.erase(std::unique(deterministic.begin(), deterministic.end()), deterministic.end());
    std::vector<char> is_det(static_cast<std::size_t>(M), 0);
    for (int d : deterministic) {
        if (d < 0 || d >= M) throw StructureError("split_degenerate: index out of range");
        is_det[static_cast<std::size_t>(d)] = 1;
    }
    DegenerateSplit out;
    out.full = spec;
    out.deterministic = deterministic;
    for (int i = 0; i < M; ++i)
        if (!is_det[static_cast<std::size_t>(i)]) out.stochastic.push_back(i);

    for (const Vec& x : probes) {
        Mat s = spec.sigma_at(x);
        const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j)
                if ((is_det[static_cast<std::size_t>(i)] || is_det[static_cast<std::size_t>(j)]) &&
                    std::abs(s(i, j)) > 1e-14 * scale)
                    throw StructureError("split_degenerate: sigma(" + std::to_string(i) + "," + std::to_string(j) +
                                         ") nonzero outside the stochastic block at " + detail::fmt_vec(x));
        if (!out.stochastic.empty()) {
            const auto m = static_cast<Eigen::Index>(out.stochastic.size());
            Mat blk(m, m);
            for (Eigen::Index a = 0; a < m; ++a)
                for (Eigen::Index c = 0; c < m; ++c) blk(a, c) = s(out.stochastic[static_cast<std::size_t>(a)], out.stochastic[static_cast<std::size_t>(c)]);
            const double cond = condition_number(blk);
            if (!(cond < kConditionLimit))
                throw SingularDiffusion("split_degenerate: stochastic block singular at " + detail::fmt_vec(x), cond);
        }
    }
    return out;
}

// block form: components 0..m-1 noisy, m..M-1 deterministic
inline DegenerateSplit split_degenerate(const DiffusionSpec& spec, int m, const std::vector<Vec>& probes) {
    if (m < 0 || m > spec.dim) throw StructureError("split_degenerate: block size out of range");
    std::vector<int> det;
    for (int i = m; i < spec.dim; ++i) det.push_back(i);
    return split_degenerate_indices(spec, std::move(det), probes);
}

// indices whose sigma row and column vanish at every probe
inline std::vector<int> detect_deterministic(const DiffusionSpec& spec, const std::vector<Vec>& probes) {
    std::vector<int> out;
    for (int i = 0; i < spec.dim; ++i) {
        bool zero = true;
        for (const Vec& x : probes) {
            Mat s = spec.sigma_at(x);
            if (s.row(i).cwiseAbs().maxCoeff() != 0.0 || s.col(i).cwiseAbs().maxCoeff() != 0.0) {
                zero = false;
                break;
            }
        }
        if (zero) out.push_back(i);
    }
    return out;
}

inline DegenerateSplit split_degenerate_auto(const DiffusionSpec& spec, const std::vector<Vec>& probes) {
    return split_degenerate_indices(spec, detect_deterministic(spec, probes), probes);
}

// ---- effective potential ---------------------------------------------------------

inline double drift_divergence(const DiffusionSpec& spec, const Vec& y, std::optional<double> step = std::nullopt) {
    const double h = detail::resolve_step(y, step);
    Vec z = y, bp(spec.dim), bm(spec.dim);
    double div = 0.0;
    for (int j = 0; j < spec.dim; ++j) {
        z[j] = y[j] + h;
        spec.drift(z, bp);
        z[j] = y[j] - h;
        spec.drift(z, bm);
        z[j] = y[j];
        div += (bp[j] - bm[j]) / (2 * h);
    }
    return div;
}

// V = -1/2 |b|^2 -/+ 1/2 div b + u ; partner takes the + sign
inline double effective_potential(const DiffusionSpec& spec, const Vec& y, std::optional<double> step = std::nullopt,
                                  bool partner = false) {
    Mat s = spec.sigma_at(y);
    if (!s.isIdentity(1e-12)) throw PreconditionError("effective_potential: spec must have unit diffusion");
    Vec b = spec.drift_at(y);
    const double div = drift_divergence(spec, y, step);
    return -0.5 * b.squaredNorm() + (partner ? 0.5 : -0.5) * div + spec.potential_at(y);
}

}  // namespace fkpath

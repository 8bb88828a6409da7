#pragma once

#include "core.hpp"
#include "transform.hpp"

namespace fkpath {

enum class Scheme { ito_euler, strat_heun };

inline const char* scheme_name(Scheme s) { return s == Scheme::ito_euler ? "ito-euler" : "strat-heun"; }

inline Scheme parse_scheme(const std::string& s) {
    if (s == "ito-euler") return Scheme::ito_euler;
    if (s == "strat-heun") return Scheme::strat_heun;
    throw ConfigError("unknown scheme '" + s + "'");
}

struct SchemeConfig {
    Scheme scheme = Scheme::ito_euler;
    TimeGrid grid;
};

inline constexpr double kBlowUpLimit = 1e12;

namespace detail {

inline void guard(const Vec& x, std::size_t step, const char* who) {
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kBlowUpLimit)
        throw BlowUp(std::string(who) + ": state left the finite range at step " + std::to_string(step), step);
}

inline void check_increments(const DiffusionSpec& spec, const Vec& x0, const TimeGrid& grid, const Mat& dw) {
    if (x0.size() != spec.dim) throw DomainError("initial state has wrong dimension");
    if (dw.rows() != static_cast<Eigen::Index>(grid.steps()) || dw.cols() != spec.dim)
        throw DomainError("increments must be N x M");
}

}  // namespace detail

// left point: x_{n+1} = x_n + delta b(x_n) + sigma(x_n) dw_n
inline Path euler_maruyama(const DiffusionSpec& spec, const Vec& x0, const TimeGrid& grid, const Mat& dw) {
    detail::check_increments(spec, x0, grid, dw);
    const int M = spec.dim;
    const auto N = static_cast<Eigen::Index>(grid.steps());
    const double d = grid.delta();
    Path p{grid, Mat(N + 1, M)};
    p.values.row(0) = x0.transpose();
    Vec x = x0, b(M), inc(M);
    Mat s(M, M);
    for (Eigen::Index n = 0; n < N; ++n) {
        spec.drift(x, b);
        spec.sigma(x, s);
        inc.noalias() = s * dw.row(n).transpose();
        x += d * b + inc;
        detail::guard(x, static_cast<std::size_t>(n + 1), "euler_maruyama");
        p.values.row(n + 1) = x.transpose();
    }
    return p;
}

// predictor-corrector; drift and noise coefficient averaged over the step
inline Path stratonovich_heun(const DiffusionSpec& spec, const Vec& x0, const TimeGrid& grid, const Mat& dw) {
    detail::check_increments(spec, x0, grid, dw);
    const int M = spec.dim;
    const auto N = static_cast<Eigen::Index>(grid.steps());
    const double d = grid.delta();
    Path p{grid, Mat(N + 1, M)};
    p.values.row(0) = x0.transpose();
    Vec x = x0, xp(M), b0(M), b1(M);
    Mat s0(M, M), s1(M, M);
    for (Eigen::Index n = 0; n < N; ++n) {
        const Vec w = dw.row(n).transpose();
        spec.drift(x, b0);
        spec.sigma(x, s0);
        xp = x + d * b0 + s0 * w;
        spec.drift(xp, b1);
        spec.sigma(xp, s1);
        x += 0.5 * d * (b0 + b1) + 0.5 * (s0 + s1) * w;
        detail::guard(x, static_cast<std::size_t>(n + 1), "stratonovich_heun");
        p.values.row(n + 1) = x.transpose();
    }
    return p;
}

inline Path simulate(const DiffusionSpec& spec, const Vec& x0, const SchemeConfig& cfg, const Mat& dw) {
    return cfg.scheme == Scheme::ito_euler ? euler_maruyama(spec, x0, cfg.grid, dw)
                                           : stratonovich_heun(spec, x0, cfg.grid, dw);
}

// Ito drift = Stratonovich drift + this
inline Vec ito_strat_drift_shift(const DiffusionSpec& spec, const Vec& x, std::optional<double> step = std::nullopt) {
    Mat s = spec.sigma_at(x);
    return 0.5 * noise_direction_derivative(s, sigma_partials_at(spec, x, step));
}

// Spec with the shift folded into the drift (Stratonovich law, Ito scheme).
inline DiffusionSpec with_strat_shift(const DiffusionSpec& spec) {
    DiffusionSpec out = spec;
    out.name = spec.name + "+shift";
    out.drift = [spec](const Vec& x, Vec& b) {
        spec.drift(x, b);
        b += ito_strat_drift_shift(spec, x);
    };
    return out;
}

// DST with c = 1 through y_j = F_j x_j, F_j = exp(-w_j + t/2):
//   dy/dt = (I - B(t)) y,  B_j = exp(w_{j+1} - w_j) on the cyclic superdiagonal.
// w holds the Wiener path at the N+1 nodes.
inline Path dst_integrating_factor(const Vec& x0, const Mat& w, const TimeGrid& grid, int order = 2) {
    if (order < 1) throw ConfigError("dst_integrating_factor: order must be >= 1");
    const auto M = x0.size();
    const auto N = static_cast<Eigen::Index>(grid.steps());
    if (w.rows() != N + 1 || w.cols() != M) throw DomainError("dst_integrating_factor: Wiener path must be (N+1) x M");
    const double d = grid.delta();

    Path p{grid, Mat(N + 1, M)};
    p.values.row(0) = x0.transpose();
    Vec y(M);
    for (Eigen::Index j = 0; j < M; ++j) y[j] = std::exp(-w(0, j)) * x0[j];
    Vec term(M), next(M), Bv(M);
    for (Eigen::Index n = 0; n < N; ++n) {
        for (Eigen::Index j = 0; j < M; ++j) Bv[j] = std::exp(w(n, (j + 1) % M) - w(n, j));
        // truncated exp(d A) y, A v = v - B v_{j+1}
        term = y;
        next = y;
        for (int k = 1; k <= order; ++k) {
            Vec a(M);
            for (Eigen::Index j = 0; j < M; ++j) a[j] = term[j] - Bv[j] * term[(j + 1) % M];
            term = (d / k) * a;
            next += term;
        }
        y = next;
        const double tn = grid.time(static_cast<std::size_t>(n + 1));
        for (Eigen::Index j = 0; j < M; ++j) p.values(n + 1, j) = std::exp(w(n + 1, j) - 0.5 * tn) * y[j];
        detail::guard(p.values.row(n + 1).transpose(), static_cast<std::size_t>(n + 1), "dst_integrating_factor");
    }
    return p;
}

}  // namespace fkpath

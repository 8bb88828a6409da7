#pragma once

#include "core.hpp"
#include "rng.hpp"

#include <numbers>

namespace fkpath {

// W(x, t) = sqrt(L)/pi sum_n (X_n(t) cos(n pi x / L) + Y_n(t) sin(n pi x / L)) / n
struct QWienerField {
    double L = 1.0;
    int n_modes = 1;
    TimeGrid grid;
    Mat X, Y;  // (N+1) x n_modes Wiener paths

    double value(double x, std::size_t n) const {
        const auto r = static_cast<Eigen::Index>(n);
        double w = 0.0;
        for (int k = 1; k <= n_modes; ++k) {
            const double a = k * std::numbers::pi * x / L;
            w += (X(r, k - 1) * std::cos(a) + Y(r, k - 1) * std::sin(a)) / k;
        }
        return std::sqrt(L) / std::numbers::pi * w;
    }

    Vec on_nodes(const Vec& xs, std::size_t n) const {
        Vec v(xs.size());
        for (Eigen::Index i = 0; i < xs.size(); ++i) v[i] = value(xs[i], n);
        return v;
    }

    // (N+1) x |xs|
    Mat sample(const Vec& xs) const {
        Mat cs(n_modes, xs.size()), sn(n_modes, xs.size());
        for (int k = 1; k <= n_modes; ++k)
            for (Eigen::Index i = 0; i < xs.size(); ++i) {
                const double a = k * std::numbers::pi * xs[i] / L;
                cs(k - 1, i) = std::cos(a) / k;
                sn(k - 1, i) = std::sin(a) / k;
            }
        return std::sqrt(L) / std::numbers::pi * (X * cs + Y * sn);
    }
};

// analytic Var W(x, t) per unit time for the truncated sum
inline double q_wiener_variance_rate(double L, int n_modes) {
    double s = 0.0;
    for (int k = 1; k <= n_modes; ++k) s += 1.0 / (static_cast<double>(k) * k);
    return L / (std::numbers::pi * std::numbers::pi) * s;
}

inline QWienerField sample_q_wiener(Stream& rng, double L, const TimeGrid& grid, int n_modes) {
    if (n_modes < 1) throw DomainError("sample_q_wiener: need at least one mode");
    if (!(L > 0.0)) throw DomainError("sample_q_wiener: L must be positive");
    QWienerField f;
    f.L = L;
    f.n_modes = n_modes;
    f.grid = grid;
    const auto N = static_cast<Eigen::Index>(grid.steps());
    f.X.setZero(N + 1, n_modes);
    f.Y.setZero(N + 1, n_modes);
    const double sd = std::sqrt(grid.delta());
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Eigen::Index n = 0; n < N; ++n)
        for (int k = 0; k < n_modes; ++k) {
            f.X(n + 1, k) = f.X(n, k) + sd * nd(rng);
            f.Y(n + 1, k) = f.Y(n, k) + sd * nd(rng);
        }
    return f;
}

// upwind transport with multiplicative noise, periodic
inline Vec stochastic_transport_step(const Vec& phi, double dx, double dt, const Vec& dW) {
    if (!(dx > 0.0) || !(dt > 0.0)) throw ConfigError("stochastic_transport_step: dx and dt must be positive");
    if (dt > dx * (1.0 + 1e-12)) throw ConfigError("stochastic_transport_step: CFL violated (dt > dx)");
    if (dW.size() != phi.size()) throw DomainError("stochastic_transport_step: noise size mismatch");
    const auto n = phi.size();
    const double c = dt / dx;
    Vec out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double left = phi[(i + n - 1) % n];
        out[i] = phi[i] - c * (phi[i] - left) + phi[i] * dW[i];
    }
    return out;
}

enum class HeatSign { wellposed, reversed };

inline Vec stochastic_heat_step(const Vec& phi, double dx, double dt, const Vec& dW,
                                HeatSign sign = HeatSign::wellposed) {
    if (!(dx > 0.0) || !(dt > 0.0)) throw ConfigError("stochastic_heat_step: dx and dt must be positive");
    if (dt > dx * dx * (1.0 + 1e-12)) throw ConfigError("stochastic_heat_step: diffusive CFL violated (dt > dx^2)");
    if (dW.size() != phi.size()) throw DomainError("stochastic_heat_step: noise size mismatch");
    const auto n = phi.size();
    const double k = (sign == HeatSign::wellposed ? 0.5 : -0.5) * dt / (dx * dx);
    Vec out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lap = phi[(i + 1) % n] - 2.0 * phi[i] + phi[(i + n - 1) % n];
        out[i] = phi[i] + k * lap + phi[i] * dW[i];
    }
    return out;
}

struct HopfCole {
    Mat h, u;  // same shape as the input history
};

// rows are time snapshots; periodic centred differences unless told otherwise
inline HopfCole hopf_cole(const Mat& phi, double dx, bool periodic = true) {
    if (!(dx > 0.0)) throw DomainError("hopf_cole: dx must be positive");
    if (!(phi.array() > 0.0).all()) throw DomainError("hopf_cole: field must be strictly positive");
    const auto T = phi.rows(), n = phi.cols();
    HopfCole r;
    r.h = phi.array().log().matrix();
    r.u.resize(T, n);
    for (Eigen::Index s = 0; s < T; ++s)
        for (Eigen::Index i = 0; i < n; ++i) {
            if (periodic) {
                r.u(s, i) = (r.h(s, (i + 1) % n) - r.h(s, (i + n - 1) % n)) / (2.0 * dx);
            } else if (n < 3) {
                throw DomainError("hopf_cole: need at least three nodes");
            } else if (i == 0) {
                r.u(s, i) = (-3.0 * r.h(s, 0) + 4.0 * r.h(s, 1) - r.h(s, 2)) / (2.0 * dx);
            } else if (i == n - 1) {
                r.u(s, i) = (3.0 * r.h(s, n - 1) - 4.0 * r.h(s, n - 2) + r.h(s, n - 3)) / (2.0 * dx);
            } else {
                r.u(s, i) = (r.h(s, i + 1) - r.h(s, i - 1)) / (2.0 * dx);
            }
        }
    return r;
}

// d_t u - 1/2 u_xx - u u_x for phi_t = 1/2 phi_xx, between snapshots s and s+1
inline Vec burgers_residual(const Mat& u, std::size_t s, double dx, double dt) {
    const auto n = u.cols();
    const auto r = static_cast<Eigen::Index>(s);
    Vec res(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ui = u(r, i), up = u(r, (i + 1) % n), um = u(r, (i + n - 1) % n);
        const double ut = (u(r + 1, i) - ui) / dt;
        res[i] = ut - 0.5 * (up - 2.0 * ui + um) / (dx * dx) - ui * (up - um) / (2.0 * dx);
    }
    return res;
}

enum class SpdeKind { transport, heat };

// snapshots every `stride` steps; noise = field increments at the nodes
inline Mat evolve_spde(SpdeKind kind, const Vec& phi0, const Vec& xs, double dx, const QWienerField& W,
                       std::size_t stride = 1, HeatSign sign = HeatSign::wellposed) {
    if (stride < 1) throw ConfigError("evolve_spde: stride must be >= 1");
    const std::size_t N = W.grid.steps();
    const double dt = W.grid.delta();
    const Mat field = W.sample(xs);
    Mat snaps(static_cast<Eigen::Index>(N / stride + 1), phi0.size());
    Vec phi = phi0;
    snaps.row(0) = phi.transpose();
    Eigen::Index row = 1;
    for (std::size_t n = 0; n < N; ++n) {
        const auto r = static_cast<Eigen::Index>(n);
        const Vec dW = (field.row(r + 1) - field.row(r)).transpose();
        phi = kind == SpdeKind::transport ? stochastic_transport_step(phi, dx, dt, dW)
                                          : stochastic_heat_step(phi, dx, dt, dW, sign);
        if (!phi.allFinite()) throw NumericalError("evolve_spde: field blew up at step " + std::to_string(n + 1));
        if ((n + 1) % stride == 0) snaps.row(row++) = phi.transpose();
    }
    return snaps;
}

}  // namespace fkpath

#pragma once

#include "core.hpp"
#include "integrate.hpp"
#include "kernels.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "wiener.hpp"

#include <algorithm>
#include <memory>

namespace fkpath {

enum class StochasticIntegral {
    ito_left,              // sum b(y_n) . dy_n
    ito_bridge_corrected,  // plus 1/2 sum J_jl (dy_j dy_l - delta_jl d): removes the O(d) bias on bridges
    strat_midpoint,        // sum (b_n + b_{n+1})/2 . dy_n  - 1/2 int div b
};

inline const char* integral_name(StochasticIntegral s) {
    switch (s) {
        case StochasticIntegral::ito_left: return "ito-left";
        case StochasticIntegral::ito_bridge_corrected: return "ito-bridge-corrected";
        case StochasticIntegral::strat_midpoint: return "strat-midpoint";
    }
    return "?";
}

inline StochasticIntegral parse_integral(const std::string& s) {
    if (s == "ito-left") return StochasticIntegral::ito_left;
    if (s == "ito-bridge-corrected") return StochasticIntegral::ito_bridge_corrected;
    if (s == "strat-midpoint") return StochasticIntegral::strat_midpoint;
    throw ConfigError("unknown stochastic integral '" + s + "'");
}

struct MCConfig {
    std::size_t n_paths = 100000;
    int modes = 512;
    int quad_steps = 64;
    std::uint64_t seed = 0;
    int threads = 1;
    StochasticIntegral integral = StochasticIntegral::ito_left;
};

struct MCEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    int quad_steps = 0;
    int modes = 0;
    std::uint64_t seed = 0;
};

struct EndpointPair {
    Vec x, y;
};

namespace detail {

inline void check_mc(const MCConfig& c) {
    if (c.n_paths < 2) throw DomainError("need at least two paths");
    if (c.modes < 1) throw DomainError("need at least one mode");
    if (c.quad_steps < 1) throw DomainError("need at least one quadrature step");
}

// mean and std_error of exp(logw) via a max shift; rows of `logw` are points
inline std::pair<double, double> weight_stats(std::span<const double> logw) {
    const std::size_t n = logw.size();
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logw) {
        if (std::isnan(v)) throw DegenerateWeight("log-weight is NaN");
        mx = std::max(mx, v);
    }
    if (!std::isfinite(mx)) {
        if (mx == -std::numeric_limits<double>::infinity()) return {0.0, 0.0};
        throw DegenerateWeight("log-weight overflow");
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(logw[i] - mx);
    const double mean = pairwise_sum(w) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = (w[i] - mean) * (w[i] - mean);
    const double var = pairwise_sum(w) / static_cast<double>(n - 1);
    const double scale = std::exp(mx);
    return {scale * mean, scale * std::sqrt(var / static_cast<double>(n))};
}

inline void require_unit_diffusion(const DiffusionSpec& spec, const std::vector<Vec>& probes, const char* who) {
    for (const Vec& p : probes) {
        Mat s = spec.sigma_at(p);
        if (!s.isIdentity(1e-12)) throw PreconditionError(std::string(who) + ": spec must have unit diffusion");
    }
}

inline std::vector<Vec> endpoint_probes(const std::vector<EndpointPair>& panel) {
    std::vector<Vec> pr;
    for (const auto& e : panel) {
        pr.push_back(e.x);
        pr.push_back(e.y);
        pr.push_back(0.5 * (e.x + e.y));
    }
    return pr;
}

inline void check_panel(const std::vector<EndpointPair>& panel, int M) {
    if (panel.empty()) throw DomainError("empty endpoint panel");
    for (const auto& e : panel)
        if (e.x.size() != M || e.y.size() != M) throw DomainError("endpoint dimension mismatch");
}

struct BridgeWorkspace {
    SineSynth syn;
    Mat noise;
    Vec z, z1, b0, b1, bp, bm;
    Mat jac;
    BridgeWorkspace(std::size_t N, int M)
        : syn(N), z(M), z1(M), b0(M), b1(M), bp(M), bm(M), jac(M, M) {}
};

// fills logw[p * n + i]; `weight` sees the bridge nodes through a callback
template <class Weight>
std::vector<double> run_bridge_panel(int M, double t, const std::vector<EndpointPair>& panel, const MCConfig& cfg,
                                     Weight&& weight) {
    const std::size_t n = cfg.n_paths, P = panel.size();
    const auto N = static_cast<std::size_t>(cfg.quad_steps);
    std::vector<double> logw(P * n);
    RngPolicy pol(cfg.seed);
    parallel_chunks(n, cfg.threads, [&](std::size_t, std::size_t b, std::size_t e) {
        BridgeWorkspace ws(N, M);
        for (std::size_t i = b; i < e; ++i) {
            Stream rng = pol.stream(i);
            WienerSeries ser = sample_series(rng, t, M, cfg.modes);
            bridge_noise_on_grid(ser, ws.syn, ws.noise);
            for (std::size_t p = 0; p < P; ++p) logw[p * n + i] = weight(ws, panel[p]);
        }
    });
    return logw;
}

}  // namespace detail

// heat kernel times E[exp(int u)] over bridges x -> y (trapezoid in time)
inline std::vector<MCEstimate> estimate_propagator_bridge(const DiffusionSpec& spec, double t,
                                                          const std::vector<EndpointPair>& panel, const MCConfig& cfg) {
    detail::check_t(t, "estimate_propagator_bridge");
    detail::check_mc(cfg);
    const int M = spec.dim;
    detail::check_panel(panel, M);
    const auto probes = detail::endpoint_probes(panel);
    detail::require_unit_diffusion(spec, probes, "estimate_propagator_bridge");
    for (const Vec& p : probes)
        if (spec.drift_at(p).cwiseAbs().maxCoeff() != 0.0)
            throw PreconditionError("estimate_propagator_bridge: spec must be drift-free");

    const TimeGrid grid(t, static_cast<std::size_t>(cfg.quad_steps));
    const auto N = static_cast<Eigen::Index>(grid.steps());
    const double d = grid.delta();
    auto weight = [&](detail::BridgeWorkspace& ws, const EndpointPair& e) {
        if (!spec.potential) return 0.0;
        double acc = 0.0;
        for (Eigen::Index k = 0; k <= N; ++k) {
            const double a = grid.time(static_cast<std::size_t>(k)) / t;
            ws.z = e.x + a * (e.y - e.x) + ws.noise.row(k).transpose();
            const double u = spec.potential(ws.z);
            acc += (k == 0 || k == N) ? 0.5 * u : u;
        }
        return d * acc;
    };
    auto logw = detail::run_bridge_panel(M, t, panel, cfg, weight);

    std::vector<MCEstimate> out;
    const std::size_t n = cfg.n_paths;
    for (std::size_t p = 0; p < panel.size(); ++p) {
        auto [m, se] = detail::weight_stats(std::span<const double>(logw).subspan(p * n, n));
        const double h = heat_kernel(M, t, panel[p].x, panel[p].y);
        out.push_back({h * m, h * se, n, cfg.quad_steps, cfg.modes, cfg.seed});
    }
    return out;
}

inline MCEstimate estimate_propagator_bridge(const DiffusionSpec& spec, const Vec& x, const Vec& y, double t,
                                             const MCConfig& cfg) {
    return estimate_propagator_bridge(spec, t, {EndpointPair{x, y}}, cfg).front();
}

// bridge paths reweighted by the Radon-Nikodym factor of the drift
inline std::vector<MCEstimate> estimate_propagator_girsanov(const DiffusionSpec& spec, double t,
                                                            const std::vector<EndpointPair>& panel,
                                                            const MCConfig& cfg) {
    detail::check_t(t, "estimate_propagator_girsanov");
    detail::check_mc(cfg);
    const int M = spec.dim;
    detail::check_panel(panel, M);
    detail::require_unit_diffusion(spec, detail::endpoint_probes(panel), "estimate_propagator_girsanov");

    const TimeGrid grid(t, static_cast<std::size_t>(cfg.quad_steps));
    const auto N = static_cast<Eigen::Index>(grid.steps());
    const double d = grid.delta();
    const auto mode = cfg.integral;

    auto node = [&](detail::BridgeWorkspace& ws, const EndpointPair& e, Eigen::Index k, Vec& out) {
        const double a = grid.time(static_cast<std::size_t>(k)) / t;
        out = e.x + a * (e.y - e.x) + ws.noise.row(k).transpose();
        if (k == 0) out = e.x;
        if (k == N) out = e.y;
    };
    auto jacobian = [&](detail::BridgeWorkspace& ws, const Vec& at) {
        const double h = default_fd_step(at);
        Vec z = at;
        for (int l = 0; l < M; ++l) {
            z[l] = at[l] + h;
            spec.drift(z, ws.bp);
            z[l] = at[l] - h;
            spec.drift(z, ws.bm);
            z[l] = at[l];
            ws.jac.col(l) = (ws.bp - ws.bm) / (2 * h);
        }
    };

    auto weight = [&](detail::BridgeWorkspace& ws, const EndpointPair& e) {
        double quad = 0.0, stoch = 0.0, corr = 0.0;
        node(ws, e, 0, ws.z);
        spec.drift(ws.z, ws.b0);
        for (Eigen::Index k = 0; k <= N; ++k) {
            const double tw = (k == 0 || k == N) ? 0.5 : 1.0;
            double inner = -0.5 * ws.b0.squaredNorm() + (spec.potential ? spec.potential(ws.z) : 0.0);
            if (mode == StochasticIntegral::strat_midpoint) {
                jacobian(ws, ws.z);
                inner -= 0.5 * ws.jac.trace();
            }
            quad += tw * inner;
            if (k == N) break;
            node(ws, e, k + 1, ws.z1);
            const Vec dy = ws.z1 - ws.z;
            spec.drift(ws.z1, ws.b1);
            if (mode == StochasticIntegral::strat_midpoint) {
                stoch += 0.5 * (ws.b0 + ws.b1).dot(dy);
            } else {
                stoch += ws.b0.dot(dy);
                if (mode == StochasticIntegral::ito_bridge_corrected) {
                    jacobian(ws, ws.z);
                    corr += 0.5 * (dy.dot(ws.jac * dy) - d * ws.jac.trace());
                }
            }
            std::swap(ws.z, ws.z1);
            std::swap(ws.b0, ws.b1);
        }
        return d * quad + stoch + corr;
    };
    auto logw = detail::run_bridge_panel(M, t, panel, cfg, weight);

    std::vector<MCEstimate> out;
    const std::size_t n = cfg.n_paths;
    for (std::size_t p = 0; p < panel.size(); ++p) {
        auto [m, se] = detail::weight_stats(std::span<const double>(logw).subspan(p * n, n));
        const double h = heat_kernel(M, t, panel[p].x, panel[p].y);
        out.push_back({h * m, h * se, n, cfg.quad_steps, cfg.modes, cfg.seed});
    }
    return out;
}

inline MCEstimate estimate_propagator_girsanov(const DiffusionSpec& spec, const Vec& x, const Vec& y, double t,
                                               const MCConfig& cfg) {
    return estimate_propagator_girsanov(spec, t, {EndpointPair{x, y}}, cfg).front();
}

// ---- expectations over unpinned paths ----------------------------------------

struct Observable {
    std::vector<double> times;  // must sit on grid nodes
    std::function<double(const std::vector<Vec>&)> fn;
};

struct RatioEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
};

struct SimulationConfig {
    SchemeConfig scheme;
    std::size_t n_paths = 100000;
    std::uint64_t seed = 0;
    int threads = 1;
};

namespace detail {

inline std::vector<std::size_t> node_indices(const TimeGrid& g, const std::vector<double>& times) {
    std::vector<std::size_t> idx;
    for (double s : times) {
        if (!(s >= 0.0 && s <= g.horizon() * (1 + 1e-12))) throw DomainError("observable time outside [0, t]");
        const double r = s / g.delta();
        const auto k = static_cast<std::size_t>(std::llround(r));
        if (std::abs(r - static_cast<double>(k)) > 1e-9 * std::max(1.0, r) || k > g.steps())
            throw DomainError("observable time " + std::to_string(s) + " is not a grid node");
        idx.push_back(k);
    }
    return idx;
}

inline double path_log_weight(const DiffusionSpec& spec, const Path& p) {
    if (!spec.potential) return 0.0;
    const auto N = p.values.rows() - 1;
    double acc = 0.0;
    for (Eigen::Index k = 0; k <= N; ++k) {
        const double u = spec.potential(p.values.row(k).transpose());
        acc += (k == 0 || k == N) ? 0.5 * u : u;
    }
    return p.grid.delta() * acc;
}

}  // namespace detail

// Runs n_paths simulations; fn(path_index, path) -> k values, stored column-wise.
template <class Fn>
Mat simulate_ensemble(const DiffusionSpec& spec, const Vec& x0, const SimulationConfig& cfg, int k, Fn&& fn) {
    if (cfg.n_paths < 2) throw DomainError("need at least two paths");
    Mat out(k, static_cast<Eigen::Index>(cfg.n_paths));
    RngPolicy pol(cfg.seed);
    parallel_chunks(cfg.n_paths, cfg.threads, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            Stream rng = pol.stream(i);
            Mat dw = sample_increments(rng, cfg.scheme.grid, spec.dim);
            Path p = simulate(spec, x0, cfg.scheme, dw);
            Vec v = fn(i, p);
            out.col(static_cast<Eigen::Index>(i)) = v;
        }
    });
    return out;
}

// E[O e^{int u}] / E[e^{int u}], std_error by leave-one-out jackknife
inline RatioEstimate ratio_from_samples(std::span<const double> obs, std::span<const double> logw, std::uint64_t seed = 0) {
    const std::size_t n = obs.size();
    if (n < 2 || logw.size() != n) throw DomainError("ratio estimator needs at least two matched samples");
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logw) {
        if (std::isnan(v)) throw DegenerateWeight("log-weight is NaN");
        mx = std::max(mx, v);
    }
    if (!std::isfinite(mx)) throw DegenerateWeight("denominator vanishes: every path weight is zero or overflowed");
    std::vector<double> w(n), ow(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::exp(logw[i] - mx);
        ow[i] = obs[i] * w[i];
    }
    const double A = pairwise_sum(ow), B = pairwise_sum(w);
    if (!(B > 0.0)) throw DegenerateWeight("denominator vanishes");
    const double R = A / B;
    std::vector<double> loo(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double Bi = B - w[i];
        if (!(Bi > 0.0)) throw DegenerateWeight("denominator vanishes after removing a single path");
        loo[i] = (A - ow[i]) / Bi;
    }
    const double mean_loo = pairwise_sum(loo) / static_cast<double>(n);
    for (auto& v : loo) v = (v - mean_loo) * (v - mean_loo);
    const double var = static_cast<double>(n - 1) / static_cast<double>(n) * pairwise_sum(loo);
    return {R, std::sqrt(var), n, seed};
}

inline RatioEstimate expectation_ratio(const DiffusionSpec& spec, const Vec& x0, const Observable& obs,
                                       const SimulationConfig& cfg) {
    const auto idx = detail::node_indices(cfg.scheme.grid, obs.times);
    Mat s = simulate_ensemble(spec, x0, cfg, 2, [&](std::size_t, const Path& p) {
        std::vector<Vec> at;
        at.reserve(idx.size());
        for (auto k : idx) at.push_back(p.at(k));
        Vec v(2);
        v[0] = obs.fn(at);
        v[1] = detail::path_log_weight(spec, p);
        return v;
    });
    const Vec o = s.row(0).transpose(), lw = s.row(1).transpose();
    return ratio_from_samples(std::span<const double>(o.data(), static_cast<std::size_t>(o.size())),
                              std::span<const double>(lw.data(), static_cast<std::size_t>(lw.size())), cfg.seed);
}

// plain mean / std_error of a sample row, fixed reduction order
inline std::pair<double, double> sample_mean(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n < 2) throw DomainError("need at least two samples");
    const double m = pairwise_sum(v) / static_cast<double>(n);
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = (v[i] - m) * (v[i] - m);
    const double var = pairwise_sum(d) / static_cast<double>(n - 1);
    return {m, std::sqrt(var / static_cast<double>(n))};
}

// ---- deterministic evolution by quadrature ------------------------------------

struct ProfileGrid {
    Vec lo, hi;
    int points = 201;  // per dimension
};

struct ProfileResult {
    std::vector<double> values;
    double boundary_mass = 0.0;  // worst relative |mass| on the window faces
    bool truncated = false;
};

inline constexpr double kBoundaryMassLimit = 1e-6;

// f(y, t) = int K(y, x | t) f0(x) dx, tensor trapezoid, M <= 3
inline ProfileResult evolve_profile(const KernelFn& kernel, const ScalarField& f0, double t, const ProfileGrid& grid,
                                    const std::vector<Vec>& targets) {
    detail::check_t(t, "evolve_profile");
    const auto M = grid.lo.size();
    if (M < 1 || M > 3) throw DomainError("evolve_profile: quadrature supports 1 <= M <= 3");
    if (grid.hi.size() != M || grid.points < 2) throw DomainError("evolve_profile: bad window");
    for (Eigen::Index j = 0; j < M; ++j)
        if (!(grid.hi[j] > grid.lo[j])) throw DomainError("evolve_profile: empty window");

    const int P = grid.points;
    std::size_t total = 1;
    for (Eigen::Index j = 0; j < M; ++j) total *= static_cast<std::size_t>(P);
    std::vector<Vec> nodes(total, Vec(M));
    std::vector<double> wts(total), fvals(total);
    std::vector<char> face(total);
    const Vec h = (grid.hi - grid.lo) / (P - 1);
    for (std::size_t q = 0; q < total; ++q) {
        std::size_t r = q;
        double w = 1.0;
        bool onface = false;
        for (Eigen::Index j = 0; j < M; ++j) {
            const int i = static_cast<int>(r % static_cast<std::size_t>(P));
            r /= static_cast<std::size_t>(P);
            nodes[q][j] = grid.lo[j] + i * h[j];
            const bool end = i == 0 || i == P - 1;
            w *= h[j] * (end ? 0.5 : 1.0);
            onface = onface || end;
        }
        wts[q] = w;
        face[q] = onface;
        fvals[q] = f0(nodes[q]);
    }

    ProfileResult res;
    std::vector<double> terms(total), absb(total), absall(total);
    for (const Vec& y : targets) {
        if (y.size() != M) throw DomainError("evolve_profile: target dimension mismatch");
        for (std::size_t q = 0; q < total; ++q) {
            const double v = wts[q] * kernel(t, nodes[q], y) * fvals[q];
            terms[q] = v;
            absall[q] = std::abs(v);
            absb[q] = face[q] ? std::abs(v) : 0.0;
        }
        res.values.push_back(pairwise_sum(terms));
        const double tot = pairwise_sum(absall);
        const double bm = tot > 0.0 ? pairwise_sum(absb) / tot : 0.0;
        res.boundary_mass = std::max(res.boundary_mass, bm);
    }
    res.truncated = res.boundary_mass > kBoundaryMassLimit;
    return res;
}

// ---- harmonic quench -----------------------------------------------------------

// ground state of the first m oscillators, flat in the rest
inline ScalarField quench_initial_profile(int m, const Vec& omega) {
    return [m, omega](const Vec& y) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += omega[j] * y[j] * y[j];
        return std::exp(-0.5 * s);
    };
}

// closed form of the evolved quench profile; the flat directions relax with tanh
inline double quench_harmonic(int m, const Vec& omega, double t, const Vec& y) {
    detail::check_t(t, "quench_harmonic");
    const auto M = omega.size();
    if (m < 1 || m > M) throw DomainError("quench_harmonic: need 1 <= m <= M");
    if (y.size() != M) throw DomainError("quench_harmonic: dimension mismatch");
    double logf = 0.0;
    for (Eigen::Index j = 0; j < M; ++j) {
        const double w = omega[j];
        if (!(w > 0.0)) throw DomainError("quench_harmonic: frequencies must be positive");
        const double z = t * w;
        if (j < m) {
            logf += -0.5 * z - 0.5 * w * y[j] * y[j];
        } else {
            // log cosh z, stable for large z
            const double lc = z + std::log1p(std::exp(-2.0 * z)) - std::log(2.0);
            logf += -0.5 * lc - 0.5 * w * std::tanh(z) * y[j] * y[j];
        }
    }
    return std::exp(logf);
}

}  // namespace fkpath

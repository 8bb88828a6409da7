#pragma once

// Oracle checks shared by the acceptance binary and the `verify` command.

#include "fkpath.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <chrono>
#include <cstring>
#include <map>
#include <random>
#include <sstream>

namespace fkpath::verify {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool pass = false;
    std::string detail;
    std::vector<double> values;  // every number the check looked at, for the determinism check
};

struct Options {
    std::uint64_t seed = 20240611;
    int threads = 1;
};

namespace detail {

inline std::string num(double v) {
    char b[64];
    std::snprintf(b, sizeof b, "%.6g", v);
    return b;
}

inline DiffusionSpec unit_spec(int M, std::function<void(const Vec&, Vec&)> drift, PotentialFn u = {}) {
    DiffusionSpec s;
    s.dim = M;
    s.drift = std::move(drift);
    s.sigma = [M](const Vec&, Mat& m) { m.setIdentity(M, M); };
    s.potential = std::move(u);
    return s;
}

inline std::vector<EndpointPair> grid_panel_5x5() {
    std::vector<EndpointPair> p;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            Vec x(1), y(1);
            x << -1.0 + 0.5 * i;
            y << -1.0 + 0.5 * j;
            p.push_back({x, y});
        }
    return p;
}

inline DiffusionSpec harmonic_bridge_spec(double omega) {
    return unit_spec(1, [](const Vec&, Vec& b) { b.setZero(1); },
                     [omega](const Vec& x) { return -0.5 * omega * omega * x.squaredNorm(); });
}

inline DiffusionSpec ou_unit_spec(double theta) {
    return unit_spec(1, [theta](const Vec& x, Vec& b) {
        b.resize(1);
        b[0] = -theta * x[0];
    });
}

inline DiffusionSpec gbm_spec_1d(double b) {
    DiffusionSpec s;
    s.dim = 1;
    s.name = "gbm";
    s.drift = [b](const Vec& x, Vec& o) {
        o.resize(1);
        o[0] = b * x[0];
    };
    s.sigma = [](const Vec& x, Mat& m) {
        m.resize(1, 1);
        m(0, 0) = x[0];
    };
    s.sigma_partials = [](const Vec&, std::vector<Mat>& d) { d.assign(1, Mat::Constant(1, 1, 1.0)); };
    return s;
}

inline double z_score(double est, double se, double exact) {
    if (se == 0.0) return est == exact ? 0.0 : std::numeric_limits<double>::infinity();
    return (est - exact) / se;
}

}  // namespace detail

// 1. bridge estimator against the harmonic propagator
inline CriterionResult criterion_1(const Options& o) {
    CriterionResult r{1, "Mehler reproduction (bridge MC vs closed form)", false, {}, {}};
    MCConfig cfg;
    cfg.n_paths = 100000;
    cfg.modes = 512;
    cfg.quad_steps = 64;
    cfg.seed = o.seed;
    cfg.threads = o.threads;
    const auto panel = detail::grid_panel_5x5();
    const auto est = estimate_propagator_bridge(detail::harmonic_bridge_spec(1.0), 1.0, panel, cfg);
    int within = 0;
    double rel00 = 0.0;
    for (std::size_t p = 0; p < panel.size(); ++p) {
        const double ex = mehler_1d(1.0, 1.0, panel[p].x[0], panel[p].y[0]);
        if (std::abs(detail::z_score(est[p].mean, est[p].std_error, ex)) <= 3.0) ++within;
        if (panel[p].x[0] == 0.0 && panel[p].y[0] == 0.0) rel00 = std::abs(est[p].mean / ex - 1.0);
        r.values.push_back(est[p].mean);
        r.values.push_back(est[p].std_error);
    }
    // sqrt(1/(2 pi sinh 1)) = 0.3680052; the often-quoted 0.368017 is an arithmetic slip
    const double k00 = mehler_1d(1.0, 1.0, 0.0, 0.0);
    const double ref = std::sqrt(1.0 / (2.0 * std::numbers::pi * std::sinh(1.0)));
    r.pass = within >= 23 && rel00 <= 0.02 && std::abs(k00 - ref) < 1e-12;
    r.detail = std::to_string(within) + "/25 within 3 stderr; rel. error at (0,0) " + detail::num(rel00) +
               "; closed form K(0,0) = " + detail::num(k00) + " (0.368017 quoted)";
    return r;
}

// 2. Girsanov-reweighted bridges against the OU kernel
inline CriterionResult criterion_2(const Options& o) {
    CriterionResult r{2, "OU/Girsanov reproduction (reweighted bridges vs OU kernel)", false, {}, {}};
    MCConfig cfg;
    cfg.n_paths = 100000;
    cfg.modes = 512;
    cfg.quad_steps = 64;
    cfg.seed = o.seed + 1;
    cfg.threads = o.threads;
    cfg.integral = StochasticIntegral::ito_bridge_corrected;
    const auto panel = detail::grid_panel_5x5();
    const auto est = estimate_propagator_girsanov(detail::ou_unit_spec(1.0), 1.0, panel, cfg);
    int within = 0;
    for (std::size_t p = 0; p < panel.size(); ++p) {
        const double ex = ou_kernel_1d(1.0, 1.0, panel[p].x[0], panel[p].y[0]);
        if (std::abs(detail::z_score(est[p].mean, est[p].std_error, ex)) <= 3.0) ++within;
        r.values.push_back(est[p].mean);
        r.values.push_back(est[p].std_error);
    }
    // sqrt(1/(pi (1 - e^-2))) = 0.6067380, not 0.606746
    const double k00 = ou_kernel_1d(1.0, 1.0, 0.0, 0.0);
    const double ref = std::sqrt(1.0 / (std::numbers::pi * (1.0 - std::exp(-2.0))));
    r.pass = within >= 23 && std::abs(k00 - ref) < 1e-12;
    r.detail = std::to_string(within) + "/25 within 3 stderr (" + integral_name(cfg.integral) +
               ", 64 steps); closed form K(0,0) = " + detail::num(k00) + " (0.606746 quoted)";
    return r;
}

// 3. forward/backward residuals of the closed-form kernels
inline CriterionResult criterion_3(const Options& o) {
    CriterionResult r{3, "Kernel PDE residuals (heat, OU-1D, OU-multi, Mehler)", false, {}, {}};
    const double h = 1e-3;
    Stream rng = RngPolicy(o.seed).stream(3);
    std::uniform_real_distribution<double> U(-1.0, 1.0), T(0.5, 1.5);
    std::normal_distribution<double> Nd(0.0, 0.5);

    Mat A(2, 2), Ah(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            A(i, j) = Nd(rng);
            Ah(i, j) = Nd(rng);
        }
    const Mat theta = 0.5 * (A + A.transpose());
    const OUParams ou = make_ou_params(theta, Ah);
    const Mat q = Ah.transpose() * Ah;

    struct Case {
        std::string name;
        int M;
        KernelFn K;
        DiffusionSpec spec;
    };
    std::vector<Case> cases;
    cases.push_back({"heat", 2, [](double t, const Vec& x, const Vec& y) { return heat_kernel(2, t, x, y); },
                     detail::unit_spec(2, [](const Vec&, Vec& b) { b.setZero(2); })});
    cases.push_back({"ou-1d", 1, [](double t, const Vec& x, const Vec& y) { return ou_kernel_1d(1.0, t, x[0], y[0]); },
                     detail::ou_unit_spec(1.0)});
    cases.push_back({"ou-multi", 2, [ou](double t, const Vec& x, const Vec& y) { return ou_kernel_multi(ou, t, x, y); },
                     detail::unit_spec(
                         2, [theta](const Vec& x, Vec& b) { b = -theta * x; },
                         [q](const Vec& x) { return -0.5 * x.dot(q * x); })});
    cases.push_back({"mehler-1d", 1, [](double t, const Vec& x, const Vec& y) { return mehler_1d(1.0, t, x[0], y[0]); },
                     detail::harmonic_bridge_spec(1.0)});

    double worst = 0.0;
    std::string worst_name;
    for (const auto& c : cases) {
        for (int k = 0; k < 10; ++k) {
            Vec x(c.M), y(c.M);
            for (int j = 0; j < c.M; ++j) {
                x[j] = U(rng);
                y[j] = U(rng);
            }
            const double t = T(rng);
            for (Side side : {Side::forward, Side::backward}) {
                const double res = std::abs(kernel_pde_residual(c.K, c.spec, x, y, t, h, side));
                r.values.push_back(res);
                if (res > worst) {
                    worst = res;
                    worst_name = c.name + (side == Side::forward ? "/forward" : "/backward");
                }
            }
        }
    }
    r.pass = worst <= 1e-3;
    r.detail = "max |residual| " + detail::num(worst) + " (" + worst_name + "), 80 evaluations";
    return r;
}

// 4. OU-1D semigroup property by quadrature
inline CriterionResult criterion_4(const Options&) {
    CriterionResult r{4, "Chapman-Kolmogorov for the OU-1D kernel", false, {}, {}};
    const int P = 2001;
    const double lo = -8.0, hi = 8.0, dz = (hi - lo) / (P - 1);
    double worst = 0.0;
    for (double x : {-1.0, 0.0, 0.7})
        for (double y : {-1.2, 0.0, 0.4, 1.5}) {
            std::vector<double> terms(P);
            for (int i = 0; i < P; ++i) {
                const double z = lo + i * dz;
                const double w = (i == 0 || i == P - 1) ? 0.5 * dz : dz;
                terms[static_cast<std::size_t>(i)] = w * ou_kernel_1d(1.0, 0.5, x, z) * ou_kernel_1d(1.0, 0.5, z, y);
            }
            const double comp = pairwise_sum(terms);
            const double ex = ou_kernel_1d(1.0, 1.0, x, y);
            const double rel = std::abs(comp / ex - 1.0);
            r.values.push_back(rel);
            worst = std::max(worst, rel);
        }
    r.pass = worst <= 1e-4;
    r.detail = "max relative error " + detail::num(worst) + " over 12 (x,y) pairs";
    return r;
}

// 5. covariance of the free Wiener series
inline CriterionResult criterion_5(const Options& o) {
    CriterionResult r{5, "Wiener series covariance E[w_s w_s'] = min(s,s')", false, {}, {}};
    const std::size_t n = 100000;
    const int K = 512;
    const double t = 1.0, s = 0.75, sp = 0.25;
    std::vector<double> prod(n);
    RngPolicy pol(o.seed + 5);
    parallel_chunks(n, o.threads, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            Stream rng = pol.stream(i);
            const WienerSeries ws = sample_series(rng, t, 1, K);
            prod[i] = eval_series(ws, s)[0] * eval_series(ws, sp)[0];
        }
    });
    auto [m, se] = sample_mean(prod);
    const double bias = std::abs(series_covariance(t, K, s, sp) - 0.25);
    const double z = (m - 0.25) / se;
    r.values = {m, se, bias};
    r.pass = std::abs(z) <= 3.0 && bias <= 1e-3;
    r.detail = "covariance " + detail::num(m) + " +/- " + detail::num(se) + " (z = " + detail::num(z) +
               "); truncation bias " + detail::num(bias);
    return r;
}

// 6. GBM directly and through the log chart
inline CriterionResult criterion_6(const Options& o) {
    CriterionResult r{6, "Lamperti equivalence for geometric Brownian motion", false, {}, {}};
    const double b = 0.1, t = 1.0, x0v = 1.0;
    const std::size_t n = 100000, N = 128;
    const DiffusionSpec direct = detail::gbm_spec_1d(b);
    const DiagonalLamperti dl = DiagonalLamperti::uniform(1, [](double x) { return x; }, Interval{0.0, std::numeric_limits<double>::infinity()});

    // the induced drift is constant here; confirm before freezing it
    const double bt = transformed_drift(direct, Vec::Constant(1, x0v))[0];
    double spread = 0.0;
    for (double p : {0.2, 0.9, 3.0, 11.0}) spread = std::max(spread, std::abs(transformed_drift(direct, Vec::Constant(1, p))[0] - bt));
    DiffusionSpec chart = detail::unit_spec(1, [bt](const Vec&, Vec& o2) { o2.setConstant(1, bt); });

    const TimeGrid grid(t, N);
    const Vec x0 = Vec::Constant(1, x0v), y0 = lamperti_map(dl, x0);
    std::vector<double> d1(n), d2(n), c1(n), c2(n);
    RngPolicy pol(o.seed + 6);
    parallel_chunks(n, o.threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Stream rng = pol.stream(i);
            const Mat dw = sample_increments(rng, grid, 1);
            const double xd = euler_maruyama(direct, x0, grid, dw).values(static_cast<Eigen::Index>(N), 0);
            const Vec yT = euler_maruyama(chart, y0, grid, dw).at(N);
            const double xc = lamperti_inverse(dl, yT)[0];
            d1[i] = xd;
            d2[i] = xd * xd;
            c1[i] = xc;
            c2[i] = xc * xc;
        }
    });
    auto [md1, sd1] = sample_mean(d1);
    auto [md2, sd2] = sample_mean(d2);
    auto [mc1, sc1] = sample_mean(c1);
    auto [mc2, sc2] = sample_mean(c2);
    const double e1 = x0v * std::exp(b * t), e2 = x0v * x0v * std::exp(2 * b * t + t);
    const double z[] = {(md1 - e1) / sd1, (md2 - e2) / sd2, (mc1 - e1) / sc1, (mc2 - e2) / sc2,
                        (md1 - mc1) / std::hypot(sd1, sc1), (md2 - mc2) / std::hypot(sd2, sc2)};
    double zmax = 0.0;
    for (double v : z) zmax = std::max(zmax, std::abs(v));
    r.values = {md1, sd1, md2, sd2, mc1, sc1, mc2, sc2, bt};
    r.pass = zmax <= 3.0 && std::abs(bt - (b - 0.5)) < 1e-6 && spread < 1e-6;
    r.detail = "induced drift " + detail::num(bt) + "; direct E[x]=" + detail::num(md1) + " E[x^2]=" + detail::num(md2) +
               "; chart E[x]=" + detail::num(mc1) + " E[x^2]=" + detail::num(mc2) + "; exact " + detail::num(e1) + ", " +
               detail::num(e2) + "; max |z| " + detail::num(zmax);
    return r;
}

// 7. Heun vs shifted Euler for sigma(x) = x
inline CriterionResult criterion_7(const Options& o) {
    CriterionResult r{7, "Ito-Stratonovich correspondence for sigma(x) = x", false, {}, {}};
    const std::size_t n = 100000, N = 128;
    const TimeGrid grid(1.0, N);
    DiffusionSpec s = detail::gbm_spec_1d(0.0);
    const DiffusionSpec shifted = with_strat_shift(s);
    const Vec x0 = Vec::Ones(1);
    std::vector<double> heun(n), ito(n), plain(n);
    RngPolicy pol(o.seed + 7);
    parallel_chunks(n, o.threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Stream rng = pol.stream(i);
            const Mat dw = sample_increments(rng, grid, 1);
            heun[i] = stratonovich_heun(s, x0, grid, dw).values(static_cast<Eigen::Index>(N), 0);
            ito[i] = euler_maruyama(shifted, x0, grid, dw).values(static_cast<Eigen::Index>(N), 0);
            plain[i] = euler_maruyama(s, x0, grid, dw).values(static_cast<Eigen::Index>(N), 0);
        }
    });
    auto [mh, sh] = sample_mean(heun);
    auto [mi, si] = sample_mean(ito);
    auto [mp, sp] = sample_mean(plain);
    const double z_match = (mh - mi) / std::hypot(sh, si);
    const double z_gap = (mh - mp) / std::hypot(sh, sp);
    r.values = {mh, sh, mi, si, mp, sp};
    r.pass = std::abs(z_match) <= 3.0 && std::abs(z_gap) > 5.0;
    r.detail = "Heun " + detail::num(mh) + ", Euler+shift " + detail::num(mi) + " (z = " + detail::num(z_match) +
               "); Euler without shift " + detail::num(mp) + " (z = " + detail::num(z_gap) + ", ratio " +
               detail::num(mh / mp) + " vs e^0.5 = " + detail::num(std::exp(0.5)) + ")";
    return r;
}

// dense reference for the zero-noise DST
inline Mat dst_dense_generator(int M) {
    Mat A = Mat::Identity(M, M);
    for (int j = 0; j < M; ++j) A(j, (j + 1) % M) -= 1.0;
    return A;
}

// 8. integrating factor vs Euler-Maruyama on the DST
inline CriterionResult criterion_8(const Options& o) {
    CriterionResult r{8, "DST integrating factor vs Euler-Maruyama", false, {}, {}};
    const int M = 8;
    const double t = 1.0;
    const Vec x0 = Vec::Ones(M);
    const DiffusionSpec dst = dst_spec(M, Vec::Ones(M));
    const std::size_t fineN = 512, paths = 200;
    const int levels = 4;  // delta = 2^-6 .. 2^-9
    std::vector<double> dev(static_cast<std::size_t>(levels) * paths);
    RngPolicy pol(o.seed + 8);
    parallel_chunks(paths, o.threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            Stream rng = pol.stream(p);
            const Mat dwf = sample_increments(rng, TimeGrid(t, fineN), M);
            for (int lv = 0; lv < levels; ++lv) {
                const std::size_t N = 64u << lv, agg = fineN / N;
                Mat dw = Mat::Zero(static_cast<Eigen::Index>(N), M);
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t a = 0; a < agg; ++a)
                        dw.row(static_cast<Eigen::Index>(n)) += dwf.row(static_cast<Eigen::Index>(n * agg + a));
                const TimeGrid g(t, N);
                const Path em = euler_maruyama(dst, x0, g, dw);
                const Path itf = dst_integrating_factor(x0, increments_to_path(dw), g);
                dev[static_cast<std::size_t>(lv) * paths + p] = (em.values - itf.values).cwiseAbs().maxCoeff();
            }
        }
    });
    std::vector<double> mean_dev;
    for (int lv = 0; lv < levels; ++lv)
        mean_dev.push_back(pairwise_sum(std::span<const double>(dev).subspan(static_cast<std::size_t>(lv) * paths, paths)) /
                           static_cast<double>(paths));
    bool halves = true;
    std::string ratios;
    for (int lv = 1; lv < levels; ++lv) {
        const double q = mean_dev[static_cast<std::size_t>(lv)] / mean_dev[static_cast<std::size_t>(lv - 1)];
        r.values.push_back(q);
        halves = halves && q >= 0.35 && q <= 0.65;
        ratios += (lv > 1 ? ", " : "") + detail::num(q);
    }

    // zero noise against the dense exponential
    const TimeGrid g0(t, 64);
    const Path z = dst_integrating_factor(x0, Mat::Zero(65, M), g0, 16);
    const Mat A = dst_dense_generator(M);
    double zerr = 0.0;
    for (std::size_t n = 0; n <= 64; ++n) {
        const double tn = g0.time(n);
        const Vec ref = std::exp(-0.5 * tn) * (tn * A).exp() * x0;
        zerr = std::max(zerr, (z.at(n) - ref).cwiseAbs().maxCoeff());
    }
    r.values.push_back(zerr);
    r.pass = halves && zerr <= 1e-8;
    r.detail = "mean max-deviation ratios per halving: " + ratios + " (target 0.5 +/- 30%); zero-noise error " +
               detail::num(zerr);
    return r;
}

// 9. Ising: Euler-Maruyama is exact
inline CriterionResult criterion_9(const Options& o) {
    CriterionResult r{9, "Ising exactness of Euler-Maruyama", false, {}, {}};
    const int M = 6;
    const double a = 1.0;
    const DiffusionSpec s = ising_spec(M, a);
    const TimeGrid grid(1.0, 256);
    double worst = 0.0;
    for (std::uint64_t p = 0; p < 20; ++p) {
        Stream rng = RngPolicy(o.seed + 9).stream(p);
        const Mat dw = sample_increments(rng, grid, M);
        const Mat w = increments_to_path(dw);
        Vec y0(M);
        for (int j = 0; j < M; ++j) y0[j] = 0.1 * j;
        const Path em = euler_maruyama(s, y0, grid, dw);
        for (std::size_t n = 0; n <= grid.steps(); ++n) {
            const Vec ex = ising_solution(M, a, y0, w.row(static_cast<Eigen::Index>(n)).transpose(), grid.time(n));
            worst = std::max(worst, (em.at(n) - ex).cwiseAbs().maxCoeff());
        }
    }
    r.values = {worst};
    r.pass = worst <= 1e-12;
    r.detail = "max |EM - exact| " + detail::num(worst) + " over 20 paths x 257 nodes";
    return r;
}

inline std::vector<Vec> quench_probes() {
    std::vector<Vec> ys;
    for (int k = 0; k <= 10; ++k) {
        Vec y(2);
        y << -1.0 + 0.2 * k, 0.5 - 0.1 * k;
        ys.push_back(y);
    }
    return ys;
}

// 10. quench closed form vs quadrature, and relaxation to the ground state
inline CriterionResult criterion_10(const Options&) {
    CriterionResult r{10, "Harmonic quench: closed form vs quadrature, late-time ground state", false, {}, {}};
    Vec om(2);
    om << 1.0, 2.0;
    const int m = 1;
    const auto ys = quench_probes();
    ProfileGrid pg{Vec::Constant(2, -8.0), Vec::Constant(2, 8.0), 321};
    KernelFn K = [om](double t, const Vec& x, const Vec& y) { return mehler_multi(om, t, x, y); };
    const ProfileResult q = evolve_profile(K, quench_initial_profile(m, om), 0.5, pg, ys);
    double worst = 0.0;
    for (std::size_t k = 0; k < ys.size(); ++k) {
        const double cf = quench_harmonic(m, om, 0.5, ys[k]);
        worst = std::max(worst, std::abs(cf - q.values[k]));
        r.values.push_back(q.values[k]);
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const Vec& y : ys) {
        const double lr = std::log(quench_harmonic(m, om, 5.0, y)) + 0.5 * (om.array() * y.array().square()).sum();
        lo = std::min(lo, lr);
        hi = std::max(hi, lr);
        r.values.push_back(lr);
    }
    r.pass = worst <= 1e-4 && (hi - lo) <= 1e-3 && !q.truncated;
    r.detail = "max |closed form - quadrature| " + detail::num(worst) + " at t=0.5; t=5 log-ratio spread " +
               detail::num(hi - lo);
    return r;
}

// 11. DNLS at the all-ones state
inline CriterionResult criterion_11(const Options&) {
    CriterionResult r{11, "DNLS non-factorizable diffusion at the uniform state", false, {}, {}};
    const int M = 6;
    const DiffusionSpec s = dnls_spec(M);
    const Vec ones = Vec::Ones(M);
    bool threw = false;
    double lam_err = std::numeric_limits<double>::quiet_NaN();
    try {
        (void)s.sigma_at(ones);
    } catch (const NonFactorizable& e) {
        threw = true;
        lam_err = e.min_eigenvalue;
    }
    const SpecReport rep = validate_spec(s, {ones});
    const double lam = rep.most_negative_eigenvalue();
    // cycle adjacency: eigenvalues 2 cos(2 pi k / M)
    double oracle = std::numeric_limits<double>::infinity();
    for (int k = 0; k < M; ++k) oracle = std::min(oracle, 2.0 * std::cos(2.0 * std::numbers::pi * k / M));
    r.values = {lam, lam_err};
    r.pass = threw && !rep.probes.front().psd && std::abs(lam - oracle) < 1e-10 && std::abs(lam_err - oracle) < 1e-10;
    r.detail = std::string(threw ? "NonFactorizable raised" : "no error raised") + "; reported min eigenvalue " +
               detail::num(lam) + " (oracle " + detail::num(oracle) + ")";
    return r;
}

// 12. defect structure
inline CriterionResult criterion_12(const Options& o) {
    CriterionResult r{12, "Defect DST structure (Lax split, algebraic coupling)", false, {}, {}};
    const int M = 6, m = 2;
    const Vec c = Vec::Ones(M);
    Stream rng = RngPolicy(o.seed + 12).stream(0);
    std::uniform_real_distribution<double> U(0.5, 2.0);
    std::vector<Vec> probes;
    for (int k = 0; k < 4; ++k) {
        Vec x(M);
        for (int j = 0; j < M; ++j) x[j] = U(rng);
        probes.push_back(x);
    }
    const DiffusionSpec lax = defect_dst_spec(M, m, DefectVariant::lax, 0.0, c);
    bool split_ok = false;
    std::string why;
    try {
        const DegenerateSplit sp = split_degenerate_auto(lax, probes);
        split_ok = sp.deterministic == std::vector<int>{m};
        for (const Vec& x : probes) split_ok = split_ok && (sp.assemble_drift(x) - lax.drift_at(x)).cwiseAbs().maxCoeff() == 0.0;
        why = "deterministic set size " + std::to_string(sp.deterministic.size());
    } catch (const Error& e) {
        why = e.what();
    }
    const DiffusionSpec alg = defect_dst_spec(M, m, DefectVariant::algebraic, 0.3, c);
    const Mat g = alg.g_at(probes.front());
    const double coupling = g(m - 1, m);
    r.values = {coupling};
    r.pass = split_ok && std::abs(coupling) > 1e-8;
    r.detail = std::string("Lax split ") + (split_ok ? "ok" : "failed") + " (" + why + "); algebraic g(m-1,m) = " +
               detail::num(coupling);
    return r;
}

inline std::vector<int> suite_members(const std::string& suite);
inline std::vector<CriterionResult> run_criteria(const std::vector<int>& ids, const Options& o);

// 13. same seed, different worker counts, identical numbers
inline CriterionResult criterion_13(const Options& o) {
    CriterionResult r{13, "Determinism across reruns and worker counts", false, {}, {}};
    auto fingerprint = [&](int threads) {
        std::vector<double> v;
        MCConfig cfg;
        cfg.n_paths = 3000;
        cfg.seed = o.seed + 13;
        cfg.threads = threads;
        for (const auto& e : estimate_propagator_bridge(detail::harmonic_bridge_spec(1.0), 1.0, detail::grid_panel_5x5(), cfg)) {
            v.push_back(e.mean);
            v.push_back(e.std_error);
        }
        cfg.integral = StochasticIntegral::ito_bridge_corrected;
        for (const auto& e : estimate_propagator_girsanov(detail::ou_unit_spec(1.0), 1.0, detail::grid_panel_5x5(), cfg)) {
            v.push_back(e.mean);
            v.push_back(e.std_error);
        }
        SimulationConfig sc{SchemeConfig{Scheme::ito_euler, TimeGrid(1.0, 64)}, 3000, o.seed + 13, threads};
        const auto rr = expectation_ratio(detail::gbm_spec_1d(0.1), Vec::Ones(1),
                                          Observable{{1.0}, [](const std::vector<Vec>& x) { return x[0][0]; }}, sc);
        v.push_back(rr.value);
        v.push_back(rr.std_error);
        Options oo = o;
        oo.threads = threads;
        for (const auto& c : run_criteria({5, 8}, oo))
            for (double x : c.values) v.push_back(x);
        return v;
    };
    const auto a = fingerprint(1), b = fingerprint(1), c = fingerprint(2), d = fingerprint(5);
    auto same = [](const std::vector<double>& x, const std::vector<double>& y) {
        return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
    };
    r.values = a;
    r.pass = same(a, b) && same(a, c) && same(a, d);
    r.detail = std::to_string(a.size()) + " numbers compared bitwise across runs with 1, 1, 2 and 5 workers";
    return r;
}

inline CriterionResult run_criterion(int id, const Options& o) {
    switch (id) {
        case 1: return criterion_1(o);
        case 2: return criterion_2(o);
        case 3: return criterion_3(o);
        case 4: return criterion_4(o);
        case 5: return criterion_5(o);
        case 6: return criterion_6(o);
        case 7: return criterion_7(o);
        case 8: return criterion_8(o);
        case 9: return criterion_9(o);
        case 10: return criterion_10(o);
        case 11: return criterion_11(o);
        case 12: return criterion_12(o);
        case 13: return criterion_13(o);
    }
    throw ConfigError("no acceptance criterion " + std::to_string(id));
}

inline std::vector<CriterionResult> run_criteria(const std::vector<int>& ids, const Options& o) {
    std::vector<CriterionResult> out;
    for (int id : ids) out.push_back(run_criterion(id, o));
    return out;
}

inline const std::map<std::string, std::vector<int>>& suites() {
    static const std::map<std::string, std::vector<int>> s{
        {"all", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13}},
        {"kernels", {3, 4}},
        {"mc", {1, 2}},
        {"wiener", {5}},
        {"transform", {6}},
        {"integrate", {7, 8}},
        {"lattice", {9, 11, 12}},
        {"quench", {10}},
        {"determinism", {13}},
    };
    return s;
}

inline std::vector<int> suite_members(const std::string& suite) {
    auto it = suites().find(suite);
    if (it == suites().end()) throw ConfigError("unknown verify suite '" + suite + "'");
    return it->second;
}

}  // namespace fkpath::verify

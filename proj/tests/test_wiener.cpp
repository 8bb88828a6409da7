#include "support.hpp"

using namespace fkpath;
using fkt::v;

TEST(Increments, UnitVarianceAndIndependentComponents) {
    const std::size_t n = 100000;
    Stream rng = RngPolicy(11).stream(0);
    const Mat dw = sample_increments(rng, TimeGrid(static_cast<double>(n), n), 2);
    ASSERT_EQ(dw.rows(), static_cast<Eigen::Index>(n));
    std::vector<double> a(n), b(n);
    double cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = dw(static_cast<Eigen::Index>(i), 0);
        b[i] = dw(static_cast<Eigen::Index>(i), 1);
        cross += a[i] * b[i];
    }
    const double tol = 3.0 * std::sqrt(2.0 / n);
    EXPECT_NEAR(fkt::var_of(a), 1.0, tol);
    EXPECT_NEAR(fkt::var_of(b), 1.0, tol);
    EXPECT_LT(std::abs(cross / n), 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Increments, FixedSeedReproduces) {
    const TimeGrid g(1.0, 50);
    Stream r1 = RngPolicy(5).stream(3), r2 = RngPolicy(5).stream(3);
    EXPECT_EQ(sample_increments(r1, g, 3), sample_increments(r2, g, 3));
}

TEST(Increments, PathRoundTrip) {
    Stream rng = RngPolicy(2).stream(0);
    const Mat dw = sample_increments(rng, TimeGrid(1.0, 20), 2);
    const Mat w = increments_to_path(dw);
    EXPECT_TRUE(w.row(0).isZero(0.0));
    EXPECT_LT((path_to_increments(w) - dw).cwiseAbs().maxCoeff(), 1e-15);
}

// sum of squared increments -> t
TEST(Increments, QuadraticVariation) {
    const std::size_t N = 100000;
    const double t = 2.0;
    Stream rng = RngPolicy(9).stream(1);
    const Mat dw = sample_increments(rng, TimeGrid(t, N), 1);
    const double qv = dw.squaredNorm();
    EXPECT_NEAR(qv, t, 3.0 * t * std::sqrt(2.0 / N));
}

TEST(Series, EndpointsAreExact) {
    Stream rng = RngPolicy(1).stream(0);
    const auto ws = sample_series(rng, 2.5, 3, 64);
    EXPECT_TRUE(eval_series(ws, 0.0).isZero(0.0));
    EXPECT_EQ(eval_series(ws, 2.5), std::sqrt(2.5) * ws.f0);
}

TEST(Series, TimeOutsideHorizonIsADomainError) {
    Stream rng = RngPolicy(1).stream(0);
    const auto ws = sample_series(rng, 1.0, 1, 8);
    EXPECT_THROW(eval_series(ws, -0.1), DomainError);
    EXPECT_THROW(eval_series(ws, 1.1), DomainError);
    EXPECT_THROW(bridge_eval(v({0}), v({0}), ws, 1.5), DomainError);
    EXPECT_THROW(sample_series(rng, 1.0, 1, 0), DomainError);
}

TEST(Series, FixedSeedReproduces) {
    Stream a = RngPolicy(3).stream(4), b = RngPolicy(3).stream(4);
    const auto s1 = sample_series(a, 1.0, 2, 16), s2 = sample_series(b, 1.0, 2, 16);
    EXPECT_EQ(s1.f0, s2.f0);
    EXPECT_EQ(s1.coeffs, s2.coeffs);
}

TEST(Series, AnalyticCovarianceConvergesToMin) {
    EXPECT_NEAR(series_covariance(1.0, 512, 0.75, 0.25), 0.25, 1e-3);
    // tail of the mode sum is bounded by 2t / (pi^2 K)
    for (int K : {8, 64, 512})
        for (auto [s, sp] : {std::pair{0.75, 0.25}, std::pair{0.5, 0.5}, std::pair{0.1, 0.9}}) {
            const double bias = std::abs(series_covariance(1.0, K, s, sp) - std::min(s, sp));
            EXPECT_LE(bias, 2.0 / (std::numbers::pi * std::numbers::pi * K));
        }
}

TEST(Series, EnsembleCovarianceMatchesMin) {
    const int n = 20000;
    std::vector<double> prod(n);
    RngPolicy pol(17);
    for (int i = 0; i < n; ++i) {
        Stream rng = pol.stream(static_cast<std::uint64_t>(i));
        const auto ws = sample_series(rng, 1.0, 1, 512);
        prod[i] = eval_series(ws, 0.75)[0] * eval_series(ws, 0.25)[0];
    }
    EXPECT_NEAR(fkt::mean_of(prod), 0.25, 3.0 * std::sqrt(fkt::var_of(prod) / n) + 1e-3);
}

TEST(Series, GridSynthesisMatchesDirectSum) {
    Stream rng = RngPolicy(8).stream(0);
    const double t = 1.7;
    const auto ws = sample_series(rng, t, 2, 300);
    const TimeGrid g(t, 64);
    const Mat w = series_on_grid(ws, g);
    for (std::size_t n = 0; n <= g.steps(); ++n) {
        const Vec d = eval_series(ws, g.time(n));
        EXPECT_LT((w.row(static_cast<Eigen::Index>(n)).transpose() - d).cwiseAbs().maxCoeff(), 1e-12) << n;
    }
}

TEST(Bridge, PinnedEndpoints) {
    Stream rng = RngPolicy(1).stream(0);
    const auto ws = sample_series(rng, 1.0, 2, 32);
    const Vec x = v({0.3, -1.0}), y = v({2.0, 0.5});
    EXPECT_EQ(bridge_eval(x, y, ws, 0.0), x);
    EXPECT_EQ(bridge_eval(x, y, ws, 1.0), y);
}

// the FFT synthesis aliases high modes back; it must agree with the plain sum
TEST(Bridge, GridSynthesisMatchesDirectSum) {
    Stream rng = RngPolicy(4).stream(0);
    const double t = 0.8;
    const Vec x = v({0.1, 0.2}), y = v({-0.4, 1.0});
    for (int K : {10, 64, 200}) {
        const auto ws = sample_series(rng, t, 2, K);
        const TimeGrid g(t, 64);
        const Path p = bridge_on_grid(x, y, ws, g);
        for (std::size_t n = 0; n <= g.steps(); ++n) {
            const Vec d = bridge_eval(x, y, ws, g.time(n));
            EXPECT_LT((p.at(n) - d).cwiseAbs().maxCoeff(), 1e-12) << "K=" << K << " n=" << n;
        }
    }
}

TEST(Bridge, SineSynthAliasesAboveNyquist) {
    const std::size_t N = 8;
    SineSynth syn(N);
    std::vector<double> out(N + 1);
    for (std::size_t mode : {3u, 11u, 13u, 16u, 19u}) {
        syn.clear();
        syn.add(mode, 1.0);
        syn.synth(out.data(), 1);
        for (std::size_t n = 0; n <= N; ++n)
            EXPECT_NEAR(out[n], std::sin(std::numbers::pi * static_cast<double>(mode * n) / N), 1e-13) << mode << " " << n;
    }
}

TEST(Bridge, MidpointVarianceIsQuarterT) {
    const int n = 20000;
    const double t = 2.0;
    std::vector<double> mid(n);
    RngPolicy pol(23);
    for (int i = 0; i < n; ++i) {
        Stream rng = pol.stream(static_cast<std::uint64_t>(i));
        mid[i] = bridge_eval(v({0}), v({0}), sample_series(rng, t, 1, 512), 0.5 * t)[0];
    }
    const double var = fkt::var_of(mid);
    EXPECT_NEAR(var, t / 4, 3.0 * (t / 4) * std::sqrt(2.0 / n) + t / (std::numbers::pi * std::numbers::pi * 512));
}

// conditioned increments vs Fourier bridge: same first two moments
TEST(Bridge, IncrementAndSeriesConstructionsAgree) {
    const int n = 20000;
    const double t = 1.0, s = 0.25;
    const TimeGrid g(t, 16);
    std::vector<double> a(n), b(n);
    RngPolicy pol(31);
    for (int i = 0; i < n; ++i) {
        Stream rng = pol.stream(static_cast<std::uint64_t>(i));
        const Mat w = increments_to_path(sample_increments(rng, g, 1));
        a[i] = 1.0 + w(4, 0) - (s / t) * w(16, 0) + (s / t) * (2.0 - 1.0);
        b[i] = bridge_eval(v({1.0}), v({2.0}), sample_series(rng, t, 1, 512), s)[0];
    }
    const double exact_var = s * (t - s) / t;
    const double se = std::sqrt(exact_var / n);
    EXPECT_NEAR(fkt::mean_of(a), 1.25, 3 * se);
    EXPECT_NEAR(fkt::mean_of(b), 1.25, 3 * se);
    const double vtol = 3.0 * exact_var * std::sqrt(2.0 / n) + 1e-3;
    EXPECT_NEAR(fkt::var_of(a), exact_var, vtol);
    EXPECT_NEAR(fkt::var_of(b), exact_var, vtol);
}

TEST(Bridge, HorizonMismatchRejected) {
    Stream rng = RngPolicy(1).stream(0);
    const auto ws = sample_series(rng, 1.0, 1, 8);
    EXPECT_THROW(bridge_on_grid(v({0}), v({0}), ws, TimeGrid(2.0, 8)), DomainError);
}

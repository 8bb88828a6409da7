#include "support.hpp"

using namespace fkpath;
using fkt::v;

namespace {

Vec nodes(double L, int n) {
    Vec xs(n);
    const double dx = 2 * L / n;
    for (int i = 0; i < n; ++i) xs[i] = -L + i * dx;
    return xs;
}

Vec gaussian(const Vec& xs, double var) {
    return (-(xs.array().square()) / (2 * var)).exp().matrix();
}

QWienerField silent(double L, const TimeGrid& g, int modes) {
    QWienerField f;
    f.L = L;
    f.n_modes = modes;
    f.grid = g;
    f.X.setZero(static_cast<Eigen::Index>(g.steps()) + 1, modes);
    f.Y = f.X;
    return f;
}

}  // namespace

TEST(QWiener, StartsAtZeroAndIsPeriodic) {
    Stream rng = RngPolicy(1).stream(0);
    const TimeGrid g(1.0, 20);
    auto W = sample_q_wiener(rng, 2.0, g, 16);
    for (double x : {-2.0, -0.3, 1.1}) {
        EXPECT_EQ(W.value(x, 0), 0.0);
        EXPECT_NEAR(W.value(x, 7), W.value(x + 4.0, 7), 1e-12);
    }
    EXPECT_THROW(sample_q_wiener(rng, 2.0, g, 0), DomainError);
    EXPECT_THROW(sample_q_wiener(rng, -1.0, g, 4), DomainError);
}

TEST(QWiener, NodeSamplingAgreesWithPointwise) {
    Stream rng = RngPolicy(2).stream(0);
    const TimeGrid g(0.5, 10);
    auto W = sample_q_wiener(rng, 1.0, g, 12);
    const Vec xs = nodes(1.0, 9);
    const Mat all = W.sample(xs);
    for (std::size_t n = 0; n <= 10; ++n)
        EXPECT_LT((all.row(static_cast<Eigen::Index>(n)).transpose() - W.on_nodes(xs, n)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(QWiener, VarianceGrowsAtTheAnalyticRate) {
    const double L = 1.5, t = 0.8;
    const int modes = 8, n = 4000;
    const TimeGrid g(t, 4);
    std::vector<double> w(n);
    RngPolicy pol(3);
    for (int i = 0; i < n; ++i) {
        Stream rng = pol.stream(static_cast<std::uint64_t>(i));
        w[i] = sample_q_wiener(rng, L, g, modes).value(0.4, 4);
    }
    const double rate = q_wiener_variance_rate(L, modes);
    EXPECT_NEAR(rate, L / (std::numbers::pi * std::numbers::pi) * 1.527422052154195, 1e-14);
    EXPECT_NEAR(fkt::var_of(w) / t, rate, 4.0 * rate * std::sqrt(2.0 / n));
}

TEST(Transport, UnitCourantNumberShiftsByOneNode) {
    const Vec phi = v({0, 1, 3, 2, 0, 0});
    const Vec out = stochastic_transport_step(phi, 0.1, 0.1, Vec::Zero(6));
    EXPECT_EQ(out, v({0, 0, 1, 3, 2, 0}));
}

TEST(Transport, MassConservedWithoutNoise) {
    const Vec xs = nodes(5.0, 100);
    Vec phi = gaussian(xs, 0.5);
    const double m0 = phi.sum();
    for (int s = 0; s < 50; ++s) phi = stochastic_transport_step(phi, 0.1, 0.05, Vec::Zero(100));
    EXPECT_NEAR(phi.sum(), m0, 1e-12 * m0);
    EXPECT_TRUE((phi.array() >= 0.0).all());
}

TEST(Transport, ZeroStaysZeroAndConstantNoiseMultiplies) {
    EXPECT_TRUE(stochastic_transport_step(Vec::Zero(5), 0.1, 0.1, Vec::Constant(5, 0.3)).isZero(0.0));
    // flat field: upwind term vanishes, each step multiplies by 1 + dW
    Vec phi = Vec::Constant(4, 2.0);
    double expect = 2.0;
    for (double a : {0.1, -0.05, 0.2}) {
        phi = stochastic_transport_step(phi, 0.1, 0.07, Vec::Constant(4, a));
        expect *= 1.0 + a;
    }
    EXPECT_LT((phi - Vec::Constant(4, expect)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Transport, CourantViolationRejected) {
    EXPECT_THROW(stochastic_transport_step(Vec::Ones(4), 0.1, 0.2, Vec::Zero(4)), ConfigError);
    EXPECT_THROW(stochastic_transport_step(Vec::Ones(4), 0.1, 0.05, Vec::Zero(3)), DomainError);
}

// discrete second moment grows by exactly dt per step while the tails are negligible
TEST(Heat, GaussianSpreadsByDtPerStep) {
    const double L = 8.0, dx = 0.05, dt = 0.5 * dx * dx;
    const Vec xs = nodes(L, static_cast<int>(2 * L / dx));
    Vec phi = gaussian(xs, 0.4);
    auto m2 = [&](const Vec& p) { return (xs.array().square() * p.array()).sum() / p.sum(); };
    const double start = m2(phi);
    const int steps = 200;
    for (int s = 0; s < steps; ++s) phi = stochastic_heat_step(phi, dx, dt, Vec::Zero(xs.size()));
    EXPECT_NEAR(m2(phi) - start, steps * dt, 1e-10);
}

TEST(Heat, ConstantFieldIsStationary) {
    const Vec phi = Vec::Constant(10, 3.0);
    EXPECT_EQ(stochastic_heat_step(phi, 0.1, 0.005, Vec::Zero(10)), phi);
    EXPECT_EQ(stochastic_heat_step(phi, 0.1, 0.005, Vec::Zero(10), HeatSign::reversed), phi);
    EXPECT_THROW(stochastic_heat_step(phi, 0.1, 0.02, Vec::Zero(10)), ConfigError);
}

TEST(Heat, SignConventionsDiffuseOppositeWays) {
    const Vec phi = v({0, 0, 1, 0, 0});
    const Vec a = stochastic_heat_step(phi, 0.1, 0.005, Vec::Zero(5));
    const Vec b = stochastic_heat_step(phi, 0.1, 0.005, Vec::Zero(5), HeatSign::reversed);
    EXPECT_LT(a[2], 1.0);
    EXPECT_GT(b[2], 1.0);
}

TEST(HopfCole, Examples) {
    Mat flat = Mat::Constant(2, 6, 4.0);
    auto r = hopf_cole(flat, 0.1);
    EXPECT_TRUE(r.u.isZero(1e-15));
    EXPECT_NEAR(r.h(0, 0), std::log(4.0), 1e-15);

    const double k = 0.7, dx = 0.1;
    Mat e(1, 8);
    for (int i = 0; i < 8; ++i) e(0, i) = std::exp(k * i * dx);
    auto q = hopf_cole(e, dx, false);
    EXPECT_LT((q.u.array() - k).abs().maxCoeff(), 1e-12);

    Mat bad = flat;
    bad(1, 3) = 0.0;
    EXPECT_THROW(hopf_cole(bad, 0.1), DomainError);
    EXPECT_THROW(hopf_cole(flat, 0.0), DomainError);
}

// noiseless heat flow maps to Burgers through the log-derivative
TEST(HopfCole, BurgersResidualIsSmall) {
    const int n = 128;
    const double L = std::numbers::pi, dx = 2 * L / n, dt = 0.4 * dx * dx;
    const Vec xs = nodes(L, n);
    Vec phi = (2.0 + xs.array().cos()).matrix();
    Mat hist(2, n);
    hist.row(0) = phi.transpose();
    hist.row(1) = stochastic_heat_step(phi, dx, dt, Vec::Zero(n)).transpose();
    auto r = hopf_cole(hist, dx);
    const Vec res = burgers_residual(r.u, 0, dx, dt);
    const double scale = ((r.u.row(1) - r.u.row(0)) / dt).cwiseAbs().maxCoeff();
    EXPECT_LT(res.cwiseAbs().maxCoeff(), 1e-2 * scale);
}

TEST(Evolve, SnapshotsAndNoiseFreeTransport) {
    const double L = 1.0;
    const int n = 10;
    const double dx = 2 * L / n;
    const TimeGrid g(12 * dx, 12);  // Courant number 1
    const Vec xs = nodes(L, n);
    Vec phi0 = Vec::Zero(n);
    phi0[2] = 1.0;
    const Mat s = evolve_spde(SpdeKind::transport, phi0, xs, dx, silent(L, g, 4), 3);
    ASSERT_EQ(s.rows(), 5);
    for (Eigen::Index r = 0; r < 5; ++r) EXPECT_NEAR(s(r, (2 + 3 * r) % n), 1.0, 1e-12) << r;
    EXPECT_THROW(evolve_spde(SpdeKind::transport, phi0, xs, dx, silent(L, g, 4), 0), ConfigError);
}

TEST(Evolve, NoisyHeatStaysFiniteAndReproduces) {
    const double L = 2.0;
    const int n = 40;
    const double dx = 2 * L / n;
    const TimeGrid g(0.2, 100);
    const Vec xs = nodes(L, n);
    const Vec phi0 = (1.0 + gaussian(xs, 0.3).array()).matrix();
    Stream r1 = RngPolicy(4).stream(0), r2 = RngPolicy(4).stream(0);
    const Mat a = evolve_spde(SpdeKind::heat, phi0, xs, dx, sample_q_wiener(r1, L, g, 8), 10);
    const Mat b = evolve_spde(SpdeKind::heat, phi0, xs, dx, sample_q_wiener(r2, L, g, 8), 10);
    EXPECT_EQ(a, b);
    EXPECT_TRUE(a.allFinite());
    EXPECT_EQ(a.rows(), 11);
}

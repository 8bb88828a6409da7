#include "support.hpp"

#include <unsupported/Eigen/MatrixFunctions>

using namespace fkpath;
using fkt::v;

namespace {

DiffusionSpec multiplicative() {
    // dx = x o dw in the Stratonovich sense
    auto s = fkt::spec_of(1, [](const Vec&, Vec& b) { b.setZero(1); },
                          [](const Vec& x, Mat& m) {
                              m.resize(1, 1);
                              m(0, 0) = x[0];
                          });
    s.sigma_partials = [](const Vec&, std::vector<Mat>& d) { d.assign(1, Mat::Ones(1, 1)); };
    return s;
}

Mat coarsen(const Mat& dw, std::size_t factor) {
    Mat out = Mat::Zero(dw.rows() / static_cast<Eigen::Index>(factor), dw.cols());
    for (Eigen::Index n = 0; n < dw.rows(); ++n) out.row(n / static_cast<Eigen::Index>(factor)) += dw.row(n);
    return out;
}

}  // namespace

TEST(EulerMaruyama, NoDriftNoNoiseStaysPut) {
    auto s = fkt::spec_of(2, [](const Vec&, Vec& b) { b.setZero(2); }, [](const Vec&, Mat& m) { m.setZero(2, 2); });
    const TimeGrid g(1.0, 10);
    Stream rng = RngPolicy(1).stream(0);
    const Path p = euler_maruyama(s, v({1.0, -2.0}), g, sample_increments(rng, g, 2));
    for (std::size_t n = 0; n <= 10; ++n) EXPECT_EQ(p.at(n), v({1.0, -2.0}));
}

TEST(EulerMaruyama, BrownianMotionIsTheShiftedPath) {
    const TimeGrid g(2.0, 40);
    Stream rng = RngPolicy(2).stream(0);
    const Mat dw = sample_increments(rng, g, 2);
    const Mat w = increments_to_path(dw);
    const Vec x0 = v({0.5, 1.0});
    const Path p = euler_maruyama(fkt::brownian(2), x0, g, dw);
    for (std::size_t n = 0; n <= g.steps(); ++n)
        EXPECT_LT((p.at(n) - x0 - w.row(static_cast<Eigen::Index>(n)).transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

// EM on geometric Brownian motion: strong error ~ sqrt(delta)
TEST(EulerMaruyama, StrongOrderHalfOnGeometricBrownianMotion) {
    const double b = 0.3, t = 1.0;
    const std::size_t fine = 1024, paths = 400;
    auto s = fkt::gbm(b);
    double e64 = 0.0, e256 = 0.0;
    RngPolicy pol(5);
    for (std::size_t p = 0; p < paths; ++p) {
        Stream rng = pol.stream(p);
        const Mat dw = sample_increments(rng, TimeGrid(t, fine), 1);
        const double exact = std::exp((b - 0.5) * t + dw.sum());
        e64 += std::abs(euler_maruyama(s, v({1.0}), TimeGrid(t, 64), coarsen(dw, 16)).at(64)[0] - exact);
        e256 += std::abs(euler_maruyama(s, v({1.0}), TimeGrid(t, 256), coarsen(dw, 4)).at(256)[0] - exact);
    }
    const double q = e256 / e64;  // expect ~ 1/2
    EXPECT_GT(q, 0.35);
    EXPECT_LT(q, 0.7);
}

TEST(Heun, SecondOrderWithoutNoise) {
    auto s = fkt::spec_of(1, [](const Vec& x, Vec& o) { o = -x; }, [](const Vec&, Mat& m) { m.setZero(1, 1); });
    auto err = [&](std::size_t N) {
        const TimeGrid g(1.0, N);
        return std::abs(stratonovich_heun(s, v({1.0}), g, Mat::Zero(static_cast<Eigen::Index>(N), 1)).at(N)[0] -
                        std::exp(-1.0));
    };
    const double q = err(32) / err(64);
    EXPECT_GT(q, 3.7);
    EXPECT_LT(q, 4.3);
}

TEST(Heun, ShiftForLinearNoiseIsHalfX) {
    auto s = multiplicative();
    for (double x : {-2.0, 0.5, 3.0}) EXPECT_NEAR(ito_strat_drift_shift(s, v({x}))[0], 0.5 * x, 1e-12);
    auto fd = s;
    fd.sigma_partials = nullptr;
    EXPECT_NEAR(ito_strat_drift_shift(fd, v({3.0}))[0], 1.5, 1e-8);
    EXPECT_NEAR(with_strat_shift(s).drift_at(v({4.0}))[0], 2.0, 1e-12);
}

// Heun reads the equation as Stratonovich, Euler needs the shift to agree
TEST(Heun, MatchesShiftedEulerPathwise) {
    auto s = multiplicative();
    auto shifted = with_strat_shift(s);
    const double t = 1.0;
    const std::size_t N = 2048, paths = 40;
    double eh = 0.0, ee = 0.0, eu = 0.0;
    RngPolicy pol(6);
    for (std::size_t p = 0; p < paths; ++p) {
        Stream rng = pol.stream(p);
        const TimeGrid g(t, N);
        const Mat dw = sample_increments(rng, g, 1);
        const double exact = std::exp(dw.sum());
        eh += std::abs(simulate(s, v({1.0}), {Scheme::strat_heun, g}, dw).at(N)[0] - exact);
        ee += std::abs(simulate(shifted, v({1.0}), {Scheme::ito_euler, g}, dw).at(N)[0] - exact);
        eu += std::abs(simulate(s, v({1.0}), {Scheme::ito_euler, g}, dw).at(N)[0] - exact);
    }
    eh /= paths;
    ee /= paths;
    eu /= paths;
    EXPECT_LT(eh, 2e-3);
    EXPECT_LT(ee, 5e-2);
    EXPECT_GT(eu, 0.2);  // unshifted Euler targets exp(w - t/2)
}

TEST(EulerMaruyama, OrnsteinUhlenbeckMeanDecays) {
    const double th = 1.5, t = 1.0;
    const std::size_t N = 50, paths = 4000;
    const TimeGrid g(t, N);
    auto s = fkt::ou(th);
    std::vector<double> end(paths);
    RngPolicy pol(7);
    for (std::size_t p = 0; p < paths; ++p) {
        Stream rng = pol.stream(p);
        end[p] = euler_maruyama(s, v({2.0}), g, sample_increments(rng, g, 1)).at(N)[0];
    }
    const double expect = 2.0 * std::pow(1.0 - th * g.delta(), static_cast<double>(N));
    EXPECT_NEAR(fkt::mean_of(end), expect, 4.0 * std::sqrt(fkt::var_of(end) / paths));
}

TEST(EulerMaruyama, ExplosionIsReported) {
    auto s = fkt::spec_of(1, [](const Vec& x, Vec& o) { o = v({x[0] * x[0]}); }, [](const Vec&, Mat& m) { m.setZero(1, 1); });
    const TimeGrid g(3.0, 3000);
    try {
        euler_maruyama(s, v({1.0}), g, Mat::Zero(3000, 1));
        FAIL() << "expected BlowUp";
    } catch (const BlowUp& e) {
        EXPECT_GT(e.step, 0u);
        EXPECT_LE(e.step, 3000u);
    }
}

TEST(EulerMaruyama, IncrementShapeIsChecked) {
    const TimeGrid g(1.0, 10);
    EXPECT_THROW(euler_maruyama(fkt::brownian(2), v({0, 0}), g, Mat::Zero(9, 2)), DomainError);
    EXPECT_THROW(stratonovich_heun(fkt::brownian(2), v({0, 0}), g, Mat::Zero(10, 1)), DomainError);
    EXPECT_THROW(euler_maruyama(fkt::brownian(2), v({0}), g, Mat::Zero(10, 2)), DomainError);
}

TEST(IntegratingFactor, ZeroNoiseMatchesMatrixExponential) {
    const int M = 5;
    Mat A = Mat::Identity(M, M);
    for (int j = 0; j < M; ++j) A(j, (j + 1) % M) -= 1.0;
    const Vec x0 = v({1.0, 0.5, -0.2, 2.0, 0.3});
    const TimeGrid g(1.5, 30);
    const Path p = dst_integrating_factor(x0, Mat::Zero(31, M), g, 16);
    for (std::size_t n = 0; n <= 30; ++n) {
        const double tn = g.time(n);
        const Vec ref = std::exp(-0.5 * tn) * (tn * A).exp() * x0;
        EXPECT_LT((p.at(n) - ref).cwiseAbs().maxCoeff(), 1e-8) << n;
    }
}

// one site: neighbour coupling cancels and x = x0 exp(w - t/2)
TEST(IntegratingFactor, SingleSiteIsExact) {
    const TimeGrid g(1.0, 20);
    Stream rng = RngPolicy(3).stream(0);
    const Mat w = increments_to_path(sample_increments(rng, g, 1));
    const Path p = dst_integrating_factor(v({1.7}), w, g);
    for (std::size_t n = 0; n <= 20; ++n)
        EXPECT_NEAR(p.at(n)[0], 1.7 * std::exp(w(static_cast<Eigen::Index>(n), 0) - 0.5 * g.time(n)), 1e-13);
}

TEST(IntegratingFactor, LinearInInitialState) {
    const int M = 4;
    const TimeGrid g(1.0, 32);
    Stream rng = RngPolicy(4).stream(0);
    const Mat w = increments_to_path(sample_increments(rng, g, M));
    const Vec a = v({1, 2, 3, 4}), b = v({0.5, -1, 0, 2});
    const Mat pa = dst_integrating_factor(a, w, g).values, pb = dst_integrating_factor(b, w, g).values;
    const Mat pab = dst_integrating_factor(a + 2.0 * b, w, g).values;
    EXPECT_LT((pab - pa - 2.0 * pb).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + pab.cwiseAbs().maxCoeff()));
}

TEST(IntegratingFactor, BadArguments) {
    const TimeGrid g(1.0, 8);
    EXPECT_THROW(dst_integrating_factor(v({1, 1}), Mat::Zero(9, 2), g, 0), ConfigError);
    EXPECT_THROW(dst_integrating_factor(v({1, 1}), Mat::Zero(8, 2), g), DomainError);
}

// gap to Euler-Maruyama shrinks under refinement
TEST(IntegratingFactor, ApproachesEulerMaruyamaUnderRefinement) {
    const int M = 4;
    const double t = 1.0;
    const std::size_t fine = 256, paths = 40;
    auto dst = dst_spec(M, Vec::Ones(M));
    double d32 = 0.0, d128 = 0.0;
    RngPolicy pol(8);
    for (std::size_t p = 0; p < paths; ++p) {
        Stream rng = pol.stream(p);
        const Mat dwf = sample_increments(rng, TimeGrid(t, fine), M);
        for (std::size_t N : {32u, 128u}) {
            const TimeGrid g(t, N);
            const Mat dw = coarsen(dwf, fine / N);
            const double d = (euler_maruyama(dst, Vec::Ones(M), g, dw).values -
                              dst_integrating_factor(Vec::Ones(M), increments_to_path(dw), g).values)
                                 .cwiseAbs()
                                 .maxCoeff();
            (N == 32 ? d32 : d128) += d;
        }
    }
    EXPECT_LT(d128 / d32, 0.85);
}

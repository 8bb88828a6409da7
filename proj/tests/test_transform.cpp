#include "support.hpp"

using namespace fkpath;
using fkt::v;

TEST(TransformedDrift, UnitNoiseLeavesDriftAlone) {
    auto s = fkt::unit(2, [](const Vec& x, Vec& b) { b = v({std::sin(x[0]), x[0] * x[1]}); });
    const Vec x = v({0.4, -1.2});
    EXPECT_LT((transformed_drift(s, x) - s.drift_at(x)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(TransformedDrift, GeometricBrownianMotion) {
    for (bool analytic : {true, false}) {
        auto s = fkt::gbm(0.7, analytic);
        for (double x : {0.3, 1.0, 5.0}) EXPECT_NEAR(transformed_drift(s, v({x}))[0], 0.7 - 0.5, 1e-8) << x;
    }
}

// log-coordinates of the self-trapping lattice: C = c - 1/2, B = -1
TEST(TransformedDrift, LatticeInLogCoordinates) {
    const int M = 4;
    const Vec c = v({0.9, 1.0, 1.3, 0.2});
    auto s = dst_spec(M, c);
    auto t = dst_transformed_spec(M, (c.array() - 0.5).matrix(), Vec::Constant(M, -1.0));
    const Vec y = v({0.1, -0.4, 0.8, 0.0});
    const Vec x = y.array().exp().matrix();
    EXPECT_LT((transformed_drift(s, x) - t.drift_at(y)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TransformedDrift, AnalyticAndDifferencedPartialsAgree) {
    auto s = dst_spec(3, v({1.0, 0.5, 2.0}));
    auto fd = s;
    fd.sigma_partials = nullptr;
    const Vec x = v({1.5, 0.7, 2.2});
    EXPECT_LT((transformed_drift(s, x) - transformed_drift(fd, x)).cwiseAbs().maxCoeff(), 1e-7);
    const auto a = sigma_partials_at(s, x), b = sigma_partials_at(fd, x);
    for (int l = 0; l < 3; ++l) EXPECT_LT((a[l] - b[l]).cwiseAbs().maxCoeff(), 1e-7) << l;
}

TEST(TransformedDrift, SingularNoiseIsRefused) {
    auto s = fkt::gbm(0.1);
    try {
        transformed_drift(s, v({0.0}));
        FAIL() << "expected SingularDiffusion";
    } catch (const SingularDiffusion& e) {
        EXPECT_FALSE(e.condition < kConditionLimit);
    }
}

TEST(Lamperti, UnitNoiseIsATranslation) {
    auto dl = DiagonalLamperti::uniform(1, [](double) { return 1.0; });
    for (double x : {-3.0, 0.0, 0.25, 9.0}) EXPECT_NEAR(lamperti_map(dl, v({x}))[0], x, 1e-12);
}

TEST(Lamperti, LinearNoiseGivesLogarithm) {
    auto dl = DiagonalLamperti::uniform(2, [](double x) { return x; }, Interval{0.0, INFINITY});
    const Vec x = v({0.05, 7.5});
    const Vec y = lamperti_map(dl, x);
    EXPECT_NEAR(y[0], std::log(0.05), 1e-10);
    EXPECT_NEAR(y[1], std::log(7.5), 1e-10);
}

TEST(Lamperti, SquareRootNoise) {
    auto dl = DiagonalLamperti::uniform(1, [](double x) { return std::sqrt(x); }, Interval{0.0, INFINITY});
    for (double x : {0.2, 1.0, 4.0}) EXPECT_NEAR(lamperti_map(dl, v({x}))[0], 2.0 * (std::sqrt(x) - 1.0), 1e-10) << x;
}

// property: inverse(map(x)) = x over each chart
TEST(Lamperti, RoundTrip) {
    struct Case {
        std::function<double(double)> sigma;
        Interval dom;
        std::vector<double> xs;
    };
    const std::vector<Case> cases = {
        {[](double) { return 2.0; }, {}, {-5.0, -0.3, 0.0, 4.0}},
        {[](double x) { return x; }, {0.0, INFINITY}, {1e-3, 0.4, 1.0, 30.0}},
        {[](double x) { return std::sqrt(x); }, {0.0, INFINITY}, {0.01, 0.5, 2.0, 50.0}},
        {[](double x) { return 1.0 + x * x; }, {}, {-4.0, -0.5, 0.7, 3.0}},
    };
    for (std::size_t k = 0; k < cases.size(); ++k) {
        auto dl = DiagonalLamperti::uniform(1, cases[k].sigma, cases[k].dom);
        for (double x : cases[k].xs) {
            const double back = lamperti_inverse(dl, lamperti_map(dl, v({x})))[0];
            EXPECT_NEAR(back, x, 1e-10 * (1.0 + std::abs(x))) << "case " << k << " x=" << x;
        }
    }
}

TEST(Lamperti, OutsideDomainAndUnreachableTargets) {
    auto pos = DiagonalLamperti::uniform(1, [](double x) { return x; }, Interval{0.0, INFINITY});
    EXPECT_THROW(lamperti_map(pos, v({-1.0})), DomainError);
    EXPECT_THROW(lamperti_map(pos, v({0.0})), DomainError);
    // integral of 1/(1+x^2) tops out at pi/2
    auto bounded = DiagonalLamperti::uniform(1, [](double x) { return 1.0 + x * x; });
    EXPECT_NEAR(lamperti_inverse(bounded, v({1.0}))[0], std::tan(1.0), 1e-9);
    EXPECT_THROW(lamperti_inverse(bounded, v({2.0})), InversionError);
    EXPECT_THROW(lamperti_map(pos, v({1.0, 2.0})), DomainError);
}

TEST(Lamperti, TransformedSpecHasUnitNoise) {
    auto g = fkt::gbm(0.4);
    g.potential = [](const Vec& x) { return -x[0]; };
    auto dl = DiagonalLamperti::uniform(1, [](double x) { return x; }, Interval{0.0, INFINITY});
    auto t = lamperti_spec(g, dl);
    const Vec y = v({0.3});
    EXPECT_TRUE(t.sigma_at(y).isIdentity(0.0));
    EXPECT_NEAR(t.drift_at(y)[0], 0.4 - 0.5, 1e-8);
    EXPECT_NEAR(t.potential_at(y), -std::exp(0.3), 1e-9);
}

namespace {

// 2 noisy + 1 deterministic coordinate
DiffusionSpec mixed() {
    return fkt::spec_of(
        3, [](const Vec& x, Vec& b) { b = v({-x[0], x[2] - x[1], x[0] * x[1]}); },
        [](const Vec& x, Mat& s) {
            s.setZero(3, 3);
            s(0, 0) = 1.0 + x[2] * x[2];
            s(0, 1) = 0.2;
            s(1, 1) = 2.0;
        });
}

}  // namespace

TEST(DegenerateSplit, BlockSplitReassemblesTheDrift) {
    auto s = mixed();
    const std::vector<Vec> probes = {v({0.1, 0.2, 0.3}), v({-1.0, 2.0, 0.0})};
    auto sp = split_degenerate(s, 2, probes);
    EXPECT_EQ(sp.m(), 2);
    EXPECT_EQ(sp.deterministic, std::vector<int>{2});
    for (const Vec& x : probes) {
        EXPECT_LT((sp.assemble_drift(x) - s.drift_at(x)).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_NEAR(sp.deterministic_drift(x)[0], x[0] * x[1], 1e-15);
        const auto st = sp.stochastic_spec(x);
        const Mat blk = st.sigma_at(sp.restrict(x));
        EXPECT_NEAR(blk(0, 0), 1.0 + x[2] * x[2], 1e-15);
        EXPECT_NEAR(blk(0, 1), 0.2, 1e-15);
    }
    auto au = split_degenerate_auto(s, probes);
    EXPECT_EQ(au.stochastic, sp.stochastic);
}

TEST(DegenerateSplit, TrivialBlocks) {
    auto s = fkt::brownian(3);
    auto all = split_degenerate(s, 3, {v({0, 0, 0})});
    EXPECT_EQ(all.m(), 3);
    EXPECT_TRUE(all.deterministic.empty());
    auto zero = fkt::spec_of(2, [](const Vec& x, Vec& b) { b = -x; }, [](const Vec&, Mat& m) { m.setZero(2, 2); });
    auto none = split_degenerate(zero, 0, {v({1, 2})});
    EXPECT_EQ(none.m(), 0);
    EXPECT_EQ(none.assemble_drift(v({1, 2})), v({-1, -2}));
}

TEST(DegenerateSplit, RejectsNoiseLeakingIntoDeterministicBlock) {
    auto s = mixed();
    EXPECT_THROW(split_degenerate(s, 1, {v({0, 0, 0})}), StructureError);
    EXPECT_THROW(split_degenerate(s, 4, {v({0, 0, 0})}), StructureError);
    EXPECT_THROW(split_degenerate(s, -1, {v({0, 0, 0})}), StructureError);
}

TEST(EffectivePotential, NoDriftGivesTheOriginalPotential) {
    auto s = fkt::unit(2, [](const Vec&, Vec& b) { b.setZero(2); }, [](const Vec& y) { return y.squaredNorm(); });
    EXPECT_NEAR(effective_potential(s, v({0.5, -1.0})), 1.25, 1e-12);
}

TEST(EffectivePotential, OrnsteinUhlenbeck) {
    const double th = 0.8;
    auto s = fkt::ou(th);
    for (double y : {-1.0, 0.0, 2.0})
        EXPECT_NEAR(effective_potential(s, v({y})), -0.5 * th * th * y * y + 0.5 * th, 1e-8) << y;
}

// V - V_partner = -div b
TEST(EffectivePotential, PartnerDiffersByDivergence) {
    auto s = fkt::unit(2, [](const Vec& y, Vec& b) { b = v({std::sin(y[1]) * y[0], -y[1] * y[1]}); });
    for (const Vec& y : {v({0.3, 0.2}), v({-1.0, 1.5})}) {
        const double d = effective_potential(s, y) - effective_potential(s, y, std::nullopt, true);
        EXPECT_NEAR(d, -(std::sin(y[1]) - 2 * y[1]), 1e-7);
        EXPECT_NEAR(drift_divergence(s, y), std::sin(y[1]) - 2 * y[1], 1e-7);
    }
}

TEST(EffectivePotential, RequiresUnitNoise) {
    EXPECT_THROW(effective_potential(fkt::gbm(0.1), v({2.0})), PreconditionError);
}

#include <gtest/gtest.h>

#include <random>

#include "instances.hpp"

using namespace bassmbb;

namespace {

ConvexPotential1D sampled(double lo, double hi, std::size_t n, double (*f)(double)) {
    ConvexPotential1D p;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        p.grid.push_back(x);
        p.values.push_back(f(x));
    }
    return p;
}

}  // namespace

TEST(DualObjective, ConjugateOfAbsoluteValue) {
    const auto psi = sampled(-1.0, 1.0, 3, [](double) { return 0.0; });
    EXPECT_NEAR(dual_objective(psi, fixtures::dirac0(), fixtures::two_point(), quantile_rule(1, 128)),
                fixtures::kSqrt2OverPi, 0.02);
}

TEST(DualObjective, HalfSquareAtDiracs) {
    const auto psi = sampled(-6.0, 6.0, 1201, [](double y) { return 0.5 * y * y; });
    EXPECT_NEAR(dual_objective(psi, fixtures::dirac0(), fixtures::dirac0(), gauss_hermite_1d(32)), 0.5, 1e-3);
}

TEST(DualObjective, GaussianInstanceHalfSquare) {
    fixtures::GaussianInstance g;
    const auto psi = sampled(-6.0, 6.0, 2401, [](double y) { return 0.5 * y * y; });
    EXPECT_NEAR(dual_objective(psi, g.mu, g.nu, gauss_hermite_1d(32)), 1.0, 0.03);
}

TEST(DualObjective, SupportOutsideGrid) {
    const auto psi = sampled(-0.5, 0.5, 3, [](double) { return 0.0; });
    try {
        (void)dual_objective(psi, fixtures::dirac0(), fixtures::two_point(), gauss_hermite_1d(8));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::SupportOutsideGrid);
    }
}

TEST(SmoothPotential, ExactOnPiecewiseLinear) {
    ConvexPotential1D f{{-1.0, 0.0, 1.0}, {1.0, 0.0, 1.0}, false, -1.0, 1.0};
    const auto rule = gauss_hermite_1d(12);
    const auto s = smooth_potential(f, rule);
    for (double x : {-2.0, -0.4, 0.0, 0.9, 3.0}) {
        double direct = 0.0;
        for (std::size_t j = 0; j < rule.size(); ++j) direct += rule.weights[j] * f(x + rule.nodes[j]);
        EXPECT_NEAR(s(x), direct, 1e-12) << x;
    }
}

TEST(CandidateFromSolution, IdentityAndSignMaps) {
    BassSolution sol;
    Vec knots(601);
    for (std::size_t i = 0; i < knots.size(); ++i) knots[i] = -3.0 + 0.01 * static_cast<double>(i);
    sol.v_map = MapSamples(1, knots, knots);
    const auto psi = candidate_from_solution(sol);
    for (double y : {-2.0, 0.0, 1.5}) EXPECT_NEAR(psi(y) - psi(0.0), 0.5 * y * y, 1e-4);

    sol.v_map = MapSamples(1, {-2.0, -1e-9, 1e-9, 2.0}, {-1.0, -1.0, 1.0, 1.0});
    const auto psi_sign = candidate_from_solution(sol);
    EXPECT_NEAR(psi_sign.grid.front(), -1.0, 1e-12);
    EXPECT_NEAR(psi_sign.grid.back(), 1.0, 1e-12);
    for (double y : {-1.0, 0.0, 0.5}) EXPECT_NEAR(psi_sign(y) - psi_sign(0.0), 0.0, 1e-8);
}

TEST(CandidateFromSolution, RejectsNonMonotoneSamples) {
    BassSolution sol;
    sol.v_map = MapSamples(1, {0.0, 1.0, 2.0}, {0.0, 1.0, 0.5});
    EXPECT_THROW((void)candidate_from_solution(sol), Error);
}

TEST(DualityGap, GaussianInstance) {
    fixtures::GaussianInstance g;
    const auto r = duality_gap(fixtures::gaussian_solution(), g.mu, g.nu);
    EXPECT_LE(std::abs(r.gap), 0.05);
    EXPECT_NEAR(r.dual_value, 1.0, 0.03);
}

TEST(DualityGap, TwoPointTarget) {
    const auto r = duality_gap(fixtures::two_point_solution(), fixtures::dirac0(), fixtures::two_point());
    EXPECT_LE(std::abs(r.gap), 0.04 * fixtures::kSqrt2OverPi);
    EXPECT_NEAR(r.dual_value, fixtures::kSqrt2OverPi, 0.02);
}

TEST(DualityGap, RandomSuboptimalPotentialsRespectWeakDuality) {
    // P-tilde is the value of a martingale coupling, so it sits below every dual value.
    fixtures::GaussianInstance g;
    const auto& sol = fixtures::gaussian_solution();
    const double primal = static_value(BassMartingaleModel::from_solution(sol, 0, sol.rule), g.mu, sol.rule).value;
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const double a = 0.2 + u(gen), b = u(gen) - 0.5, c = u(gen);
        ConvexPotential1D psi;
        for (int i = 0; i <= 400; ++i) {
            const double y = -5.0 + 10.0 * i / 400.0;
            psi.grid.push_back(y);
            psi.values.push_back(0.5 * a * y * y + b * y + c * std::abs(y - 0.3));
        }
        const auto r = duality_gap(psi, primal, g.mu, g.nu, sol.rule, 1e-9);
        EXPECT_FALSE(r.weak_duality_violated) << t << ' ' << r.gap;
    }
}

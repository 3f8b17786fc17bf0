#include <gtest/gtest.h>

#include <random>

#include "instances.hpp"

using namespace bassmbb;
using fixtures::GaussianInstance;

TEST(EvaluateV, AllDiracsAtOrigin) {
    EXPECT_NEAR(evaluate_V(fixtures::dirac0(), fixtures::dirac0(), fixtures::dirac0()).value, 0.0, 1e-15);
}

TEST(EvaluateV, GaussianOracle) {
    const auto mu = gaussian_1d(0, 1, 64), nu = gaussian_1d(0, 2, 64);
    EXPECT_NEAR(evaluate_V(gaussian_1d(0, 1, 64), mu, nu).value, 1.0, 0.02);
}

TEST(EvaluateV, EqualMarginalsFormula) {
    const auto m = gaussian_1d(0, 1, 64);
    EXPECT_NEAR(evaluate_V(gaussian_1d(0, 4, 64), m, m).value, std::sqrt(5.0) - 2.0, 0.02);
}

TEST(EvaluateV, TranslationInvariant) {
    std::mt19937_64 gen(4);
    for (std::size_t d : {1u, 2u}) {
        const auto mu = fixtures::random_measure(gen, d, 5), nu = fixtures::random_measure(gen, d, 6, false, 2.0);
        const auto a = fixtures::random_measure(gen, d, 4);
        const Vec shift(d, 0.8);
        BassConfig cfg;
        cfg.quadrature_nodes = 6;
        // V(alpha + c) - V(alpha) = <c, bary(nu) - bary(mu)>.
        double expected = 0.0;
        const Vec bn = barycenter(nu), bm = barycenter(mu);
        for (std::size_t k = 0; k < d; ++k) expected += shift[k] * (bn[k] - bm[k]);
        EXPECT_NEAR(evaluate_V(translate(a, shift), mu, nu, cfg).value - evaluate_V(a, mu, nu, cfg).value, expected, 1e-9);
    }
}

TEST(EvaluateV, MomentIdentityWithU) {
    GaussianInstance g;
    std::mt19937_64 gen(13);
    const auto rule = gauss_hermite_1d(32);
    const double expected = 0.5 + 0.5 * second_moment(g.nu) - 0.5 * second_moment(g.mu);
    for (int t = 0; t < 5; ++t) {
        const auto a = fixtures::random_measure(gen, 1, 30, false, 1.5);
        const double v = evaluate_V(a, g.mu, g.nu, rule).value, u = evaluate_U(a, g.mu, g.nu, rule);
        EXPECT_NEAR(v - 0.5 * u, expected, 1e-10);
    }
}

TEST(GradientField, SmallAtGaussianSolution) {
    GaussianInstance g;
    const auto a = gaussian_quantiles_1d(0, 1, 200);
    EXPECT_LE(field_norm(a, gradient_field(a, g.mu, g.nu)), 0.05);
}

TEST(GradientField, SingleAtomWithEqualMarginals) {
    std::mt19937_64 gen(2);
    const auto m = fixtures::random_measure(gen, 1, 7);
    const Vec bary = barycenter(m);
    const auto a = DiscreteMeasure::dirac(bary);
    EXPECT_NEAR(gradient_field(a, m, m)[0], 0.0, 1e-12);
}

TEST(GradientField, FiniteDifferenceConsistency) {
    GaussianInstance g;
    std::mt19937_64 gen(5);
    const auto a = fixtures::random_measure(gen, 1, 40, false, 1.3);
    const auto rule = gauss_hermite_1d(32);
    const auto ev = evaluate_V(a, g.mu, g.nu, rule);
    const Vec field = gradient_field(ev, a, g.mu, g.nu, rule);
    const double h = 1e-4;
    int checked = 0;
    for (std::size_t i = 0; i < a.size(); i += 7) {
        DiscreteMeasure moved = a;
        moved.point(i)[0] -= h * field[i];
        const double dv = evaluate_V(moved, g.mu, g.nu, rule).value - ev.value;
        const double predicted = -h * a.weight(i) * field[i] * field[i];
        EXPECT_NEAR(dv, predicted, 0.05 * std::abs(predicted) + 1e-10) << i;
        ++checked;
    }
    EXPECT_GT(checked, 3);
}

TEST(MinimizeV, GaussianInstance) {
    const auto& sol = fixtures::gaussian_solution();
    EXPECT_EQ(sol.status, BassStatus::Converged);
    EXPECT_NEAR(sol.value, 1.0, 0.03);
    EXPECT_NEAR(second_moment(sol.alpha_hat), 1.0, 0.05);
    EXPECT_LE(sol.residual, 0.05);
    ASSERT_FALSE(sol.trace.empty());
    for (std::size_t k = 1; k < sol.trace.size(); ++k) EXPECT_LE(sol.trace[k].value, sol.trace[k - 1].value + 1e-12);
}

TEST(MinimizeV, TwoPointTarget) {
    const auto& sol = fixtures::two_point_solution();
    EXPECT_EQ(sol.status, BassStatus::Converged);
    EXPECT_NEAR(sol.value, fixtures::kSqrt2OverPi, 0.02);
    EXPECT_LE(second_moment(sol.alpha_hat), 0.05);
}

TEST(MinimizeV, EqualMarginalsSpread) {
    const auto m = gaussian_quantiles_1d(0, 1, 200);
    const auto sol = minimize_V(m, m, fixtures::grid_1d(-2, 2, 200));
    EXPECT_EQ(sol.status, BassStatus::SpreadDetected);
    EXPECT_LE(sol.value, 0.05);
}

TEST(MinimizeV, RejectsOrderViolation) {
    try {
        (void)minimize_V(fixtures::two_point(), fixtures::dirac0(), fixtures::dirac0());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ConvexOrderViolated);
    }
}

TEST(MinimizeV, ObserverSeesEveryIteration) {
    std::size_t calls = 0;
    const auto sol = minimize_V(fixtures::dirac0(), fixtures::two_point(), fixtures::grid_1d(-1, 1, 20), {},
                                [&](const TraceRecord&) { ++calls; });
    EXPECT_GE(calls, sol.iterations);
}

TEST(FixedPointStep, GaussianSolutionIsFixed) {
    GaussianInstance g;
    const auto a = gaussian_quantiles_1d(0, 1, 200);
    EXPECT_LE(std::sqrt(w2_squared(fixed_point_step(a, g.mu, g.nu), a)), 0.05);
}

TEST(FixedPointStep, DiracMu) {
    const auto out = fixed_point_step(fixtures::grid_1d(-1, 1, 5), fixtures::dirac0(), fixtures::two_point());
    ASSERT_EQ(compact(out).size(), 1u);
    EXPECT_NEAR(out.point(0)[0], 0.0, 1e-9);
}

TEST(FixedPointStep, ContractsTowardSolution) {
    GaussianInstance g;
    const auto target = gaussian_quantiles_1d(0, 1, 200);
    const auto a0 = gaussian_quantiles_1d(0, 4, 200);
    const double before = std::sqrt(w2_squared(a0, target));
    const double after = std::sqrt(w2_squared(fixed_point_step(a0, g.mu, g.nu), target));
    EXPECT_LT(after, before);
}

TEST(WeakDuality, Examples) {
    GaussianInstance g;
    const auto& sol = fixtures::gaussian_solution();
    const auto at_opt = weak_duality_check(sol.alpha_hat, g.mu, g.nu, sol.value, 1e-9);
    EXPECT_NEAR(at_opt.margin, 0.0, 1e-9);
    EXPECT_FALSE(at_opt.violated);

    const auto wide = weak_duality_check(gaussian_quantiles_1d(0, 9, 200), g.mu, g.nu, 1.0);
    EXPECT_NEAR(wide.value, std::sqrt(20.0) - 3.0, 0.01);
    EXPECT_FALSE(wide.violated);

    const auto trivial = weak_duality_check(fixtures::dirac0(), fixtures::dirac0(), fixtures::dirac0(), 0.0);
    EXPECT_FALSE(trivial.violated);
    EXPECT_EQ(trivial.value, 0.0);

    EXPECT_TRUE(weak_duality_check(sol.alpha_hat, g.mu, g.nu, sol.value + 0.1).violated);
}

TEST(Quadrature, DefaultsPerDimension) {
    EXPECT_EQ(default_quadrature_nodes(1), 32u);
    EXPECT_EQ(default_quadrature_nodes(2), 16u);
    EXPECT_EQ(default_quadrature_nodes(3), 6u);
    BassConfig cfg;
    cfg.quadrature_nodes = 5;
    EXPECT_EQ(quadrature_for(cfg, 2).size(), 25u);
}

#include <gtest/gtest.h>

#include <cstdlib>

#include "instances.hpp"

using namespace bassmbb;
using fixtures::GaussianInstance;

namespace {

BassMartingaleModel map_model(const DiscreteMeasure& alpha, Vec knots, Vec values) {
    BassMartingaleModel m;
    m.alpha_hat = alpha;
    m.v_map = MapSamples(1, knots, values);
    m.phi_map = m.v_map;
    m.rule = simulation_rule(1);
    return m;
}

const PathEnsemble& gaussian_paths() {
    static const PathEnsemble e =
        simulate_paths(BassMartingaleModel::from_solution(fixtures::gaussian_solution(), 42), 10000, 10, 42);
    return e;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST(MapVt, IdentityMapCommutesWithSmoothing) {
    const Vec k = {-10.0, 10.0};
    const auto m = map_model(fixtures::dirac0(), k, k);
    for (double t : {0.0, 0.3, 0.9, 1.0})
        for (double x : {-1.5, 0.0, 0.7}) EXPECT_NEAR(map_vt(m, Vec{x}, t)[0], x, 1e-12);
}

TEST(MapVt, SmoothedSignFromTwoPointSolution) {
    const auto m = BassMartingaleModel::from_solution(fixtures::two_point_solution());
    for (double t : {0.0, 0.5, 0.8})
        for (double x : {-1.0, -0.3, 0.2, 0.6})
            EXPECT_NEAR(map_vt(m, Vec{x}, t)[0], 2.0 * normal_cdf(x / std::sqrt(1.0 - t)) - 1.0, 0.02) << x << ' ' << t;
}

TEST(MapVt, TerminalTimeUsesSamples) {
    const auto m = map_model(fixtures::dirac0(), {-1.0, 0.0, 2.0}, {-3.0, 0.5, 4.0});
    EXPECT_DOUBLE_EQ(map_vt(m, Vec{2.0}, 1.0)[0], 4.0);
    EXPECT_THROW((void)map_vt(m, Vec{0.0}, 1.5), Error);
}

TEST(SimulatePaths, ConstantMapGivesConstantPaths) {
    const auto m = map_model(fixtures::grid_1d(-1, 1, 5), {-1.0, 1.0}, {2.5, 2.5});
    const auto e = simulate_paths(m, 200, 5, 1);
    for (std::size_t p = 0; p < e.n_paths; ++p)
        for (std::size_t t = 0; t < e.n_times(); ++t) EXPECT_DOUBLE_EQ(e.M(p, t)[0], 2.5);
    const auto err = marginal_error(e, DiscreteMeasure::line({2.5}, {1.0}), DiscreteMeasure::line({2.5}, {1.0}));
    EXPECT_LE(err.e1, 1e-12);
    const auto tr = expected_trace_sigma_estimate(e);
    EXPECT_NEAR(tr.mean, 0.0, 3.0 * tr.standard_error + 1e-12);
}

TEST(SimulatePaths, GaussianInstanceIsBrownian) {
    const auto& e = gaussian_paths();
    double s = 0.0, s2 = 0.0, db = 0.0;
    for (std::size_t p = 0; p < e.n_paths; ++p) {
        const double v = e.M(p, e.n_times() - 1)[0];
        s += v;
        s2 += v * v;
        const double gap = v - e.B(p, e.n_times() - 1)[0];
        db += gap * gap;
    }
    const double n = static_cast<double>(e.n_paths);
    EXPECT_NEAR(s2 / n - (s / n) * (s / n), 2.0, 0.1);
    EXPECT_LT(std::sqrt(db / n), 0.1);
}

TEST(SimulatePaths, MartingaleIncrementMean) {
    const auto& e = gaussian_paths();
    const auto half = trace_sigma_between(e, 0, 0);  // zero-width sanity
    EXPECT_EQ(half.mean, 0.0);
    double s = 0.0, s2 = 0.0;
    for (std::size_t p = 0; p < e.n_paths; ++p) {
        const double v = e.M(p, 10)[0] - e.M(p, 5)[0];
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(e.n_paths), mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_LE(std::abs(mean), 3.0 * se);
    EXPECT_LT(martingale_increment_check(e, 5, 10).max_z, 4.0);
}

TEST(SimulatePaths, DeterministicAcrossRunsAndWorkerCounts) {
    const auto model = BassMartingaleModel::from_solution(fixtures::gaussian_solution(), 7);
    ::setenv("BASSMBB_THREADS", "1", 1);
    const auto a = simulate_paths(model, 300, 4, 99);
    ::setenv("BASSMBB_THREADS", "3", 1);
    const auto b = simulate_paths(model, 300, 4, 99);
    ::unsetenv("BASSMBB_THREADS");
    EXPECT_EQ(a.m, b.m);
    EXPECT_EQ(a.b, b.b);
    EXPECT_NE(simulate_paths(model, 300, 4, 100).b, a.b);
}

TEST(MarginalError, GaussianInstanceWithinBand) {
    GaussianInstance g;
    const auto err = marginal_error(gaussian_paths(), g.mu, g.nu);
    EXPECT_LE(err.e0, 0.08);
    EXPECT_LE(err.e1, 0.08);
}

TEST(MarginalError, ResamplingFloorIsInTheSameBand) {
    GaussianInstance g;
    const double floor = resampling_floor(g.mu, 10000, 3);
    EXPECT_GT(floor, 0.0);
    EXPECT_LE(floor, 0.08);
}

TEST(StaticValue, TwoPointTarget) {
    const auto& sol = fixtures::two_point_solution();
    const auto rep = static_value(BassMartingaleModel::from_solution(sol), fixtures::dirac0(), sol.rule);
    EXPECT_NEAR(rep.value, fixtures::kSqrt2OverPi, 0.02);
    EXPECT_LE(rep.max_violation, 0.02);
}

TEST(StaticValue, DiracTargetIsZero) {
    const auto m = map_model(fixtures::dirac0(), {-1.0, 1.0}, {0.0, 0.0});
    EXPECT_NEAR(static_value(m, fixtures::dirac0(), gauss_hermite_1d(16)).value, 0.0, 1e-15);
}

TEST(StaticValue, GaussianMatchesSolver) {
    GaussianInstance g;
    const auto& sol = fixtures::gaussian_solution();
    const double p = static_value(BassMartingaleModel::from_solution(sol), g.mu, sol.rule).value;
    EXPECT_NEAR(p, 1.0, 0.03);
    EXPECT_NEAR(p, sol.value, 0.03);
}

TEST(ExpectedTraceSigma, GaussianInstance) {
    EXPECT_NEAR(expected_trace_sigma(gaussian_paths()), 1.0, 0.05);
}

TEST(ExpectedTraceSigma, TwoPointTarget) {
    const auto e = simulate_paths(BassMartingaleModel::from_solution(fixtures::two_point_solution()), 10000, 10, 42);
    EXPECT_NEAR(expected_trace_sigma(e), fixtures::kSqrt2OverPi, 0.05);
}

TEST(McovRate, GaussianBassFlow) {
    GaussianInstance g;
    const auto& sol = fixtures::gaussian_solution();
    const MarginalFlow flow{{0.0, g.mu}, {0.05, gaussian_smooth(g.mu, 0.05, sol.rule)}};
    EXPECT_NEAR(mcov_rate(sol.alpha_hat, flow, 0.0, 0.05, sol.rule), 1.0, 0.05);
    EXPECT_GE(mcov_rate(gaussian_quantiles_1d(0, 9, 200), flow, 0.0, 0.05, sol.rule), 0.95);
}

TEST(McovRate, ConstantFlowIsNonNegative) {
    GaussianInstance g;
    const MarginalFlow flow{{0.0, g.mu}, {0.05, g.mu}};
    EXPECT_GE(mcov_rate(g.mu, flow, 0.0, 0.05), 0.0);
}

TEST(McovRate, MissingMarginal) {
    const MarginalFlow flow{{0.0, fixtures::dirac0()}};
    try {
        (void)mcov_rate(fixtures::dirac0(), flow, 0.0, 0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MissingMarginal);
    }
}

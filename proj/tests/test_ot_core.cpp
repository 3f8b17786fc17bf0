#include <gtest/gtest.h>

#include <random>

#include "instances.hpp"

using namespace bassmbb;

namespace {

DiscreteMeasure pm1() { return DiscreteMeasure::line({-1.0, 1.0}, {0.5, 0.5}); }
DiscreteMeasure pm2() { return DiscreteMeasure::line({-2.0, 2.0}, {0.5, 0.5}); }

void expect_marginals(const TransportResult& r, const DiscreteMeasure& p, const DiscreteMeasure& q, double tol) {
    const Vec rs = r.coupling.row_sums(), cs = r.coupling.col_sums();
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(rs[i], p.weight(i), tol);
    for (std::size_t j = 0; j < q.size(); ++j) EXPECT_NEAR(cs[j], q.weight(j), tol);
}

void expect_dual_certificate(const TransportResult& r, const DiscreteMeasure& p, const DiscreteMeasure& q) {
    const auto& f = r.potentials.f;
    const auto& g = r.potentials.g;
    ASSERT_EQ(f.size(), p.size());
    ASSERT_EQ(g.size(), q.size());
    double dual = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dual += f[i] * p.weight(i);
    for (std::size_t j = 0; j < q.size(); ++j) dual += g[j] * q.weight(j);
    EXPECT_NEAR(dual, r.value, 1e-9);
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j) EXPECT_GE(f[i] + g[j], dot(p.point(i), q.point(j)) - 1e-9);
}

}  // namespace

TEST(McovExact1d, TwoAtomComonotone) {
    const auto r = mcov_exact_1d(pm1(), pm2());
    EXPECT_NEAR(r.value, 2.0, 1e-15);
    expect_marginals(r, pm1(), pm2(), 1e-15);
    expect_dual_certificate(r, pm1(), pm2());
}

TEST(McovExact1d, DiracFactorizes) {
    std::mt19937_64 gen(1);
    const auto q = fixtures::random_measure(gen, 1, 7);
    const auto r = mcov_exact_1d(DiscreteMeasure::line({1.7}, {1.0}), q);
    EXPECT_NEAR(r.value, 1.7 * barycenter(q)[0], 1e-14);
}

TEST(McovExact1d, GaussianOracle) {
    EXPECT_NEAR(mcov_exact_1d(gaussian_1d(0, 1, 64), gaussian_1d(0, 4, 64)).value, 2.0, 1e-3);
}

TEST(McovExact1d, UnequalWeightsCertificate) {
    std::mt19937_64 gen(5);
    for (int t = 0; t < 20; ++t) {
        const auto p = fixtures::random_measure(gen, 1, 3 + t % 5), q = fixtures::random_measure(gen, 1, 2 + t % 7);
        const auto r = mcov_exact_1d(p, q);
        expect_marginals(r, p, q, 1e-12);
        expect_dual_certificate(r, p, q);
        EXPECT_NEAR(r.value, mcov_lp(p, q).value, 1e-9);
    }
}

TEST(McovLp, AgreesWithExact1dAndBruteForce) {
    std::mt19937_64 gen(11);
    for (int t = 0; t < 60; ++t) {
        const std::size_t d = 1 + t % 3, n = 1 + t % 7;
        const auto p = fixtures::random_measure(gen, d, n, true), q = fixtures::random_measure(gen, d, n, true);
        const auto lp = mcov_lp(p, q);
        EXPECT_NEAR(lp.value, brute_force_mcov(p, q), 1e-9);
        if (d == 1) {
            EXPECT_NEAR(lp.value, mcov_exact_1d(p, q).value, 1e-9);
        }
        expect_marginals(lp, p, q, 1e-12);
        expect_dual_certificate(lp, p, q);
    }
}

TEST(McovLp, IdentityOnUnitVectors) {
    for (std::size_t k = 1; k <= 4; ++k) {
        Vec c(k * k, 0.0);
        for (std::size_t i = 0; i < k; ++i) c[i * k + i] = 1.0;
        const auto p = DiscreteMeasure::uniform(k, c);
        EXPECT_NEAR(mcov_lp(p, p).value, 1.0, 1e-12);
    }
}

TEST(McovLp, SizeCap) {
    std::mt19937_64 gen(2);
    const auto p = fixtures::random_measure(gen, 2, 30);
    try {
        (void)mcov_lp(p, p, LpOptions{100});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::SizeCapExceeded);
    }
}

TEST(BruteForce, Examples) {
    EXPECT_NEAR(brute_force_mcov(pm1(), pm2()), 2.0, 1e-15);
    const auto a = DiscreteMeasure::dirac(Vec{1.0, 2.0}), b = DiscreteMeasure::dirac(Vec{3.0, -1.0});
    EXPECT_NEAR(brute_force_mcov(a, b), 1.0, 1e-15);
    std::mt19937_64 gen(8);
    const auto p = fixtures::random_measure(gen, 2, 6, true), q = fixtures::random_measure(gen, 2, 6, true);
    EXPECT_NEAR(brute_force_mcov(p, q), mcov_lp(p, q).value, 1e-9);
}

TEST(McovEntropic, EpsilonSweepApproachesExact) {
    std::mt19937_64 gen(21);
    const auto p = fixtures::random_measure(gen, 2, 12), q = fixtures::random_measure(gen, 2, 15);
    const double exact = mcov_lp(p, q).value;
    const double scale = 1.0 + second_moment(p) + second_moment(q);
    double prev_gap = std::numeric_limits<double>::infinity();
    for (double eps : {0.1, 0.05, 0.01}) {
        EntropicOptions o;
        o.epsilon = eps;
        const auto r = mcov_entropic(p, q, o);
        const double gap = std::abs(exact - r.value);
        EXPECT_LE(gap, prev_gap + 1e-12) << eps;
        EXPECT_LE(r.stats.marginal_violation, 1e-6);
        prev_gap = gap;
    }
    EXPECT_LT(prev_gap, 1e-2 * scale);
}

TEST(McovEntropic, DiracPairAndGaussianOracle) {
    EXPECT_NEAR(mcov_entropic(fixtures::dirac0(), fixtures::dirac0(), {}).value, 0.0, 1e-12);
    EntropicOptions o;
    o.epsilon = 0.01;
    EXPECT_NEAR(mcov_entropic(gaussian_1d(0, 1, 64), gaussian_1d(0, 4, 64), o).value, 2.0, 0.02);
}

TEST(W2Squared, Examples) {
    std::mt19937_64 gen(4);
    const auto p = fixtures::random_measure(gen, 2, 8);
    EXPECT_NEAR(w2_squared(p, p), 0.0, 1e-9);
    EXPECT_NEAR(w2_squared(DiscreteMeasure::line({1.0}, {1.0}), DiscreteMeasure::line({-2.5}, {1.0})), 12.25, 1e-13);
    EXPECT_NEAR(w2_squared(gaussian_1d(0, 1, 64), gaussian_1d(0, 4, 64)), 1.0, 2e-3);
}

TEST(BrenierMap, Examples) {
    const auto r = mcov_exact_1d(pm1(), pm2());
    EXPECT_NEAR(brenier_map(r, pm2(), 0)[0], -2.0, 1e-15);
    EXPECT_NEAR(brenier_map(r, pm2(), 1)[0], 2.0, 1e-15);

    std::mt19937_64 gen(6);
    const auto p = fixtures::random_measure(gen, 2, 6, true);
    const auto self = mcov_lp(p, p);
    const Vec t = brenier_map_all(self, p);
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_NEAR(t[k], p.coords()[k], 1e-12);

    const auto target = DiscreteMeasure::dirac(Vec{0.5, -1.0});
    const Vec td = brenier_map_all(mcov(p, target), target);
    for (std::size_t i = 0; i < p.size(); ++i) {
        EXPECT_NEAR(td[2 * i], 0.5, 1e-14);
        EXPECT_NEAR(td[2 * i + 1], -1.0, 1e-14);
    }
}

TEST(MapEvaluate, Examples) {
    const MapSamples s(1, {0.0, 1.0, 3.0}, {0.0, 2.0, 2.5});
    EXPECT_DOUBLE_EQ(map_evaluate(s, Vec{1.0})[0], 2.0);
    EXPECT_DOUBLE_EQ(map_evaluate(s, Vec{0.5})[0], 1.0);
    EXPECT_DOUBLE_EQ(map_evaluate(s, Vec{2.0})[0], 2.25);

    const MapSamples s2(2, {0.0, 0.0, 1.0, 0.0, 0.0, 1.0}, {1.0, 1.0, 2.0, 2.0, 3.0, 3.0});
    const Vec v = map_evaluate(s2, Vec{1.0, 0.0});
    EXPECT_DOUBLE_EQ(v[0], 2.0);
    EXPECT_DOUBLE_EQ(v[1], 2.0);
}

TEST(MapEvaluate, MonotoneSamplesGiveMonotoneMap) {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int t = 0; t < 20; ++t) {
        Vec x(12), y(12);
        for (double& v : x) v = u(gen);
        for (double& v : y) v = u(gen);
        std::sort(x.begin(), x.end());
        std::sort(y.begin(), y.end());
        const MapSamples s(1, x, y);
        double prev = -std::numeric_limits<double>::infinity();
        for (double q = -4.0; q <= 4.0; q += 0.01) {
            const double v = map_evaluate(s, Vec{q})[0];
            EXPECT_GE(v, prev);
            prev = v;
        }
    }
}

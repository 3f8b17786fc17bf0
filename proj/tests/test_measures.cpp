#include <gtest/gtest.h>

#include "instances.hpp"

using namespace bassmbb;

TEST(Normalize, SingleAtom) {
    const auto m = normalize(DiscreteMeasure::line({0.0}, {2.0}));
    ASSERT_EQ(m.size(), 1u);
    EXPECT_DOUBLE_EQ(m.weight(0), 1.0);
}

TEST(Normalize, ProportionalRescale) {
    const auto m = normalize(DiscreteMeasure::line({-1.0, 1.0}, {1.0, 3.0}));
    EXPECT_DOUBLE_EQ(m.weight(0), 0.25);
    EXPECT_DOUBLE_EQ(m.weight(1), 0.75);
}

TEST(Normalize, DropsZeroAtoms) {
    const auto m = normalize(DiscreteMeasure::line({0.0, 1.0}, {1.0, 0.0}));
    ASSERT_EQ(m.size(), 1u);
    EXPECT_DOUBLE_EQ(m.point(0)[0], 0.0);
    EXPECT_DOUBLE_EQ(m.weight(0), 1.0);
}

TEST(Normalize, RejectsAllZeroWeights) {
    try {
        (void)normalize(DiscreteMeasure::line({0.0, 1.0}, {0.0, 0.0}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::AllZeroWeights);
    }
}

TEST(DiscreteMeasure, RejectsBadInput) {
    EXPECT_THROW(DiscreteMeasure::line({std::nan("")}, {1.0}), Error);
    EXPECT_THROW(DiscreteMeasure::line({0.0}, {-1.0}), Error);
    EXPECT_THROW(DiscreteMeasure(2, {0.0, 1.0, 2.0}, {1.0}), Error);
}

TEST(Barycenter, Examples) {
    EXPECT_NEAR(barycenter(fixtures::two_point())[0], 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(barycenter(DiscreteMeasure::line({2.5}, {1.0}))[0], 2.5);
    EXPECT_DOUBLE_EQ(barycenter(DiscreteMeasure::line({0.0, 4.0}, {0.25, 0.75}))[0], 3.0);
}

TEST(SecondMoment, Examples) {
    EXPECT_EQ(second_moment(fixtures::dirac0()), 0.0);
    EXPECT_DOUBLE_EQ(second_moment(fixtures::two_point()), 1.0);
    for (std::size_t n : {32u, 48u, 64u}) EXPECT_NEAR(second_moment(gaussian_1d(0.0, 1.0, n)), 1.0, 1e-8) << n;
}

TEST(GaussHermite, IntegratesPolynomialsExactly) {
    const auto r = gauss_hermite_1d(10);
    double m0 = 0, m2 = 0, m4 = 0, m6 = 0;
    for (std::size_t j = 0; j < r.size(); ++j) {
        const double x = r.nodes[j];
        m0 += r.weights[j];
        m2 += r.weights[j] * x * x;
        m4 += r.weights[j] * std::pow(x, 4);
        m6 += r.weights[j] * std::pow(x, 6);
    }
    EXPECT_NEAR(m0, 1.0, 1e-13);
    EXPECT_NEAR(m2, 1.0, 1e-12);
    EXPECT_NEAR(m4, 3.0, 1e-11);
    EXPECT_NEAR(m6, 15.0, 1e-10);
}

TEST(GaussianSmooth, DiracGivesGaussian) {
    const auto rule = gauss_hermite(2, 8);
    const auto s = gaussian_smooth(DiscreteMeasure::dirac(Vec{0.0, 0.0}), 0.5, rule);
    EXPECT_NEAR(second_moment(s), 0.5 * 2.0, 1e-12);
}

TEST(GaussianSmooth, TwoPointMomentIdentity) {
    const auto s = gaussian_smooth(fixtures::two_point(), 1.0, gauss_hermite_1d(32));
    EXPECT_NEAR(second_moment(s), 2.0, 1e-6);
}

TEST(GaussianSmooth, PreservesBarycenter) {
    std::mt19937_64 gen(3);
    const auto m = fixtures::random_measure(gen, 2, 9);
    const auto s = gaussian_smooth(m, 0.7, gauss_hermite(2, 6));
    const Vec a = barycenter(m), b = barycenter(s);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(a[k], b[k], 1e-10);
    EXPECT_EQ(s.size(), m.size() * 36);
}

TEST(GaussianSmooth, RejectsNonPositiveTime) {
    EXPECT_THROW((void)gaussian_smooth(fixtures::dirac0(), 0.0, gauss_hermite_1d(4)), Error);
}

TEST(DiscretizeGaussian, Moments) {
    const auto g = discretize_gaussian({{0.0}, {1.0}}, 32);
    EXPECT_NEAR(barycenter(g)[0], 0.0, 1e-12);
    EXPECT_NEAR(second_moment(g), 1.0, 1e-8);
    EXPECT_NEAR(barycenter(discretize_gaussian({{3.0}, {1.0}}, 32))[0], 3.0, 1e-12);
    EXPECT_NEAR(second_moment(discretize_gaussian({{0.0, 0.0}, {1.0, 4.0}}, 16)), 5.0, 1e-6);
}

TEST(QuantileRule, UnitMomentsAndEqualWeights) {
    const auto r = quantile_rule(1, 128);
    double m1 = 0, m2 = 0;
    for (std::size_t j = 0; j < r.size(); ++j) {
        m1 += r.weights[j] * r.nodes[j];
        m2 += r.weights[j] * r.nodes[j] * r.nodes[j];
        EXPECT_DOUBLE_EQ(r.weights[j], 1.0 / 128.0);
    }
    EXPECT_NEAR(m1, 0.0, 1e-14);
    EXPECT_NEAR(m2, 1.0, 1e-12);
    EXPECT_EQ(quantile_rule(2, 5).size(), 25u);
}

TEST(QuantileRule, StepFunctionErrorIsSmall) {
    // P(Gamma > 0.3), where Gauss-Hermite rules are coarse.
    const auto r = quantile_rule(1, 128);
    double p = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) p += r.nodes[j] > 0.3 ? r.weights[j] : 0.0;
    EXPECT_NEAR(p, 0.5 * std::erfc(0.3 / std::sqrt(2.0)), 0.01);
}

TEST(NormalQuantile, InvertsTheCdf) {
    for (double p : {1e-6, 0.01, 0.3, 0.5, 0.9, 0.999}) {
        const double x = normal_quantile(p);
        EXPECT_NEAR(0.5 * std::erfc(-x / std::sqrt(2.0)), p, 1e-12 + 1e-10 * p);
    }
    EXPECT_THROW((void)normal_quantile(0.0), Error);
    EXPECT_THROW((void)normal_quantile(1.0), Error);
}

TEST(GaussianQuantiles, MatchesRequestedMoments) {
    const auto m = gaussian_quantiles_1d(1.0, 2.0, 400);
    EXPECT_NEAR(barycenter(m)[0], 1.0, 1e-12);
    EXPECT_NEAR(second_moment(m) - 1.0, 2.0, 1e-10);
}

TEST(Mixture, InterpolatesWeights) {
    const auto a = DiscreteMeasure::line({0.0}, {1.0}), b = DiscreteMeasure::line({2.0}, {1.0});
    const auto m = mixture(a, b, 0.25);
    EXPECT_NEAR(barycenter(m)[0], 0.5, 1e-15);
    EXPECT_THROW((void)mixture(a, b, 1.5), Error);
}

TEST(Translate, ShiftsEveryAtom) {
    const Vec shift{1.5};
    const auto t = translate(fixtures::two_point(), shift);
    EXPECT_NEAR(barycenter(t)[0], 1.5, 1e-15);
    EXPECT_NEAR(second_moment(t), 1.0 + 2.25, 1e-14);
}

TEST(Compact, MergesDuplicateAtoms) {
    const auto c = compact(DiscreteMeasure::line({1.0, 0.0, 1.0}, {0.25, 0.5, 0.25}));
    ASSERT_EQ(c.size(), 2u);
    EXPECT_NEAR(second_moment(c), 0.5, 1e-15);
}

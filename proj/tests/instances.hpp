#pragma once

// Shared test instances.

#include <cmath>
#include <random>

#include "bassmbb/bassmbb.hpp"

namespace bassmbb::fixtures {

inline const double kSqrt2OverPi = std::sqrt(2.0 / M_PI);

/// mu = N(0,1), nu = N(0,2) as equal-weight quantile clouds.
struct GaussianInstance {
    DiscreteMeasure mu = gaussian_quantiles_1d(0.0, 1.0, 200);
    DiscreteMeasure nu = gaussian_quantiles_1d(0.0, 2.0, 400);
};

inline DiscreteMeasure grid_1d(double lo, double hi, std::size_t n) {
    Vec c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return DiscreteMeasure::uniform(1, std::move(c));
}

inline DiscreteMeasure dirac0() { return DiscreteMeasure::line({0.0}, {1.0}); }
inline DiscreteMeasure two_point() { return DiscreteMeasure::line({-1.0, 1.0}, {0.5, 0.5}); }

inline const BassSolution& gaussian_solution() {
    static const BassSolution sol = [] {
        GaussianInstance g;
        return minimize_V(g.mu, g.nu, grid_1d(-3.0, 3.0, 200));
    }();
    return sol;
}

inline const BassSolution& two_point_solution() {
    static const BassSolution sol = minimize_V(dirac0(), two_point(), grid_1d(-1.0, 1.0, 20));
    return sol;
}

/// Random measure with `n` atoms in dimension `d`; equal weights when `uniform`.
template <class Gen>
DiscreteMeasure random_measure(Gen& gen, std::size_t d, std::size_t n, bool uniform = false, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    Vec c(n * d), w(n);
    for (double& v : c) v = normal(gen);
    for (double& v : w) v = uniform ? 1.0 : unif(gen);
    return normalize(DiscreteMeasure(d, std::move(c), std::move(w)));
}

}  // namespace bassmbb::fixtures

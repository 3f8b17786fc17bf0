#pragma once

// Displacement and generalized geodesics in W2, convexity profiles of V and
// U(alpha) = W2^2(alpha, mu) - W2^2(alpha * gamma, nu) along them, and profiles
// along linear mixtures.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "bassmbb/bass_core.hpp"
#include "bassmbb/errors.hpp"
#include "bassmbb/measures.hpp"
#include "bassmbb/ot_core.hpp"
#include "bassmbb/parallel.hpp"

namespace bassmbb {

enum class CurveKind { Mccann1d, GeneralizedBaseMu, LinearMixture };

[[nodiscard]] inline const char* to_string(CurveKind k) noexcept {
    switch (k) {
        case CurveKind::Mccann1d: return "mccann_1d";
        case CurveKind::GeneralizedBaseMu: return "generalized_base_mu";
        case CurveKind::LinearMixture: return "linear_mixture";
    }
    return "unknown";
}

/// A curve u -> alpha_u. Displacement kinds carry particles (Z0_i, Z1_i, w_i) and,
/// for the generalized kind, the base point X_i each particle is glued to.
struct GeodesicCurve {
    CurveKind kind = CurveKind::Mccann1d;
    DiscreteMeasure alpha0;
    DiscreteMeasure alpha1;
    std::optional<DiscreteMeasure> base;
    std::size_t dim = 1;
    Vec z0;
    Vec z1;
    Vec x;  // generalized kind only
    Vec weights;

    [[nodiscard]] std::size_t particles() const noexcept { return weights.size(); }

    [[nodiscard]] DiscreteMeasure at(double u) const {
        if (!(u >= 0.0 && u <= 1.0)) throw Error(Errc::InvalidArgument, "curve parameter outside [0, 1]");
        if (kind == CurveKind::LinearMixture) return mixture(alpha0, alpha1, u);
        Vec c(z0.size());
        for (std::size_t k = 0; k < c.size(); ++k) c[k] = (1.0 - u) * z0[k] + u * z1[k];
        return DiscreteMeasure(dim, std::move(c), weights);
    }
};

/// Comonotone pairing of two measures on the line.
[[nodiscard]] inline GeodesicCurve mccann_curve_1d(const DiscreteMeasure& a0_in, const DiscreteMeasure& a1_in) {
    if (a0_in.dim() != 1 || a1_in.dim() != 1) throw Error(Errc::DimensionNotOne, "McCann interpolation here is 1-D");
    GeodesicCurve c;
    c.kind = CurveKind::Mccann1d;
    c.alpha0 = normalize(a0_in);
    c.alpha1 = normalize(a1_in);
    const TransportResult r = mcov_exact_1d(c.alpha0, c.alpha1);
    for (const auto& e : r.coupling.entries()) {
        c.z0.push_back(c.alpha0.point(e.row)[0]);
        c.z1.push_back(c.alpha1.point(e.col)[0]);
        c.weights.push_back(e.mass);
    }
    return c;
}

[[nodiscard]] inline DiscreteMeasure mccann_geodesic_1d(const DiscreteMeasure& a0, const DiscreteMeasure& a1, double u) {
    return mccann_curve_1d(a0, a1).at(u);
}

/// Generalized geodesic with base mu: optimal plans alpha0 -> mu and alpha1 -> mu,
/// glued through an optimal coupling of the conditional laws given each atom of mu.
[[nodiscard]] inline GeodesicCurve generalized_curve(const DiscreteMeasure& a0_in, const DiscreteMeasure& a1_in,
                                                     const DiscreteMeasure& mu_in, const OtOptions& ot = {}) {
    require_same_dim(a0_in, a1_in);
    require_same_dim(a0_in, mu_in);
    GeodesicCurve c;
    c.kind = CurveKind::GeneralizedBaseMu;
    c.alpha0 = normalize(a0_in);
    c.alpha1 = normalize(a1_in);
    c.base = normalize(mu_in);
    c.dim = c.alpha0.dim();
    const DiscreteMeasure& mu = *c.base;
    const Coupling p0 = mcov(c.alpha0, mu, ot).coupling.transposed();
    const Coupling p1 = mcov(c.alpha1, mu, ot).coupling.transposed();
    const auto conditional = [&](const auto& row, const DiscreteMeasure& a, std::vector<std::size_t>& idx) {
        Vec pts, w;
        for (const auto& e : row) {
            if (!(e.mass > 0.0)) continue;
            const auto pt = a.point(e.col);
            pts.insert(pts.end(), pt.begin(), pt.end());
            w.push_back(e.mass);
            idx.push_back(e.col);
        }
        return normalize(DiscreteMeasure(a.dim(), std::move(pts), std::move(w)));
    };
    for (std::size_t k = 0; k < mu.size(); ++k) {
        const auto r0 = p0.row(k), r1 = p1.row(k);
        double m0 = 0.0;
        for (const auto& e : r0) m0 += e.mass;
        if (!(m0 > 0.0)) continue;
        std::vector<std::size_t> i0, i1;
        const DiscreteMeasure c0 = conditional(r0, c.alpha0, i0);
        const DiscreteMeasure c1 = conditional(r1, c.alpha1, i1);
        const Coupling glue = mcov(c0, c1, ot).coupling;
        const std::span<const double> xk = mu.point(k);
        for (std::size_t i = 0; i < glue.rows(); ++i)
            for (const auto& e : glue.row(i)) {
                const double w = e.mass * m0;
                if (!(w > 0.0)) continue;
                const std::span<const double> a = c.alpha0.point(i0[i]), b = c.alpha1.point(i1[e.col]);
                c.z0.insert(c.z0.end(), a.begin(), a.end());
                c.z1.insert(c.z1.end(), b.begin(), b.end());
                c.x.insert(c.x.end(), xk.begin(), xk.end());
                c.weights.push_back(w);
            }
    }
    return c;
}

[[nodiscard]] inline DiscreteMeasure generalized_geodesic(const DiscreteMeasure& a0, const DiscreteMeasure& a1,
                                                          const DiscreteMeasure& mu, double u, const OtOptions& ot = {}) {
    return generalized_curve(a0, a1, mu, ot).at(u);
}

[[nodiscard]] inline GeodesicCurve linear_mixture_curve(const DiscreteMeasure& a0, const DiscreteMeasure& a1) {
    require_same_dim(a0, a1);
    GeodesicCurve c;
    c.kind = CurveKind::LinearMixture;
    c.alpha0 = normalize(a0);
    c.alpha1 = normalize(a1);
    c.dim = a0.dim();
    return c;
}

/// E<Z_u, X> under the glued particles: the value of the coupling (Z_u, X).
[[nodiscard]] inline double glued_covariance(const GeodesicCurve& c, double u) {
    if (c.kind != CurveKind::GeneralizedBaseMu) throw Error(Errc::InvalidArgument, "curve has no base coupling");
    double s = 0.0;
    for (std::size_t i = 0; i < c.particles(); ++i)
        for (std::size_t k = 0; k < c.dim; ++k)
            s += c.weights[i] * ((1.0 - u) * c.z0[i * c.dim + k] + u * c.z1[i * c.dim + k]) * c.x[i * c.dim + k];
    return s;
}

enum class Functional { V, U };

/// U(alpha) = W2^2(alpha, mu) - W2^2(alpha * gamma, nu).
[[nodiscard]] inline double evaluate_U(const DiscreteMeasure& alpha, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                       const QuadratureRule& rule, const OtOptions& ot = {}) {
    const DiscreteMeasure a = normalize(alpha);
    const DiscreteMeasure s = gaussian_smooth(a, 1.0, rule);
    const double m2a = second_moment(a), m2s = second_moment(s);
    const double w_mu = m2a + second_moment(mu) - 2.0 * mcov(a, mu, ot).value;
    const double w_nu = m2s + second_moment(nu) - 2.0 * mcov(s, nu, ot).value;
    return w_mu - w_nu;
}

struct ConvexityProfile {
    Vec u;
    Vec values;
    Vec second_differences;  // interior points, f(u+) - 2 f(u) + f(u-)
    double min_second_difference = std::numeric_limits<double>::infinity();
};

namespace detail {

inline ConvexityProfile finish_profile(Vec u, Vec values) {
    ConvexityProfile p;
    p.u = std::move(u);
    p.values = std::move(values);
    for (std::size_t i = 1; i + 1 < p.values.size(); ++i) {
        const double d2 = p.values[i + 1] - 2.0 * p.values[i] + p.values[i - 1];
        p.second_differences.push_back(d2);
        p.min_second_difference = std::min(p.min_second_difference, d2);
    }
    return p;
}

inline void require_u_grid(const Vec& u) {
    if (u.size() < 3) throw Error(Errc::InvalidArgument, "profile grid needs at least three points");
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!(u[i] >= 0.0 && u[i] <= 1.0)) throw Error(Errc::InvalidArgument, "profile grid outside [0, 1]");
        if (i > 0 && !(u[i] > u[i - 1])) throw Error(Errc::InvalidArgument, "profile grid must be increasing");
    }
}

}  // namespace detail

[[nodiscard]] inline Vec uniform_grid(std::size_t points) {
    Vec u(points);
    for (std::size_t i = 0; i < points; ++i) u[i] = static_cast<double>(i) / static_cast<double>(points - 1);
    return u;
}

/// Values of V or U along the curve, evaluated independently per grid point.
[[nodiscard]] inline ConvexityProfile convexity_profile(Functional f, const GeodesicCurve& curve, const DiscreteMeasure& mu,
                                                        const DiscreteMeasure& nu, const Vec& u_grid,
                                                        const BassConfig& cfg = {}) {
    detail::require_u_grid(u_grid);
    const DiscreteMeasure m = normalize(mu), n = normalize(nu);
    const QuadratureRule rule = quadrature_for(cfg, m.dim());
    Vec values(u_grid.size());
    parallel_for(u_grid.size(), [&](std::size_t i) {
        const DiscreteMeasure a = curve.at(u_grid[i]);
        values[i] = f == Functional::V ? evaluate_V(a, m, n, rule, cfg.ot).value : evaluate_U(a, m, n, rule, cfg.ot);
    }, 1);
    return detail::finish_profile(u_grid, std::move(values));
}

/// V along the weight mixture (1 - u) alpha0 + u alpha1.
[[nodiscard]] inline ConvexityProfile linear_mixture_profile(const DiscreteMeasure& a0, const DiscreteMeasure& a1,
                                                             const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                                             const Vec& u_grid, const BassConfig& cfg = {}) {
    return convexity_profile(Functional::V, linear_mixture_curve(a0, a1), mu, nu, u_grid, cfg);
}

/// Tolerance scale 1 + |V(alpha0)| + |V(alpha1)|.
[[nodiscard]] inline double profile_scale(const ConvexityProfile& p) {
    return 1.0 + std::abs(p.values.front()) + std::abs(p.values.back());
}

/// Whether alpha1 is a translate of alpha0 on the line: the comonotone pairing
/// moves every particle by the same amount.
[[nodiscard]] inline bool are_translates_1d(const DiscreteMeasure& a0, const DiscreteMeasure& a1, double tol = 1e-9) {
    const GeodesicCurve c = mccann_curve_1d(a0, a1);
    double scale = 1.0;
    for (double v : c.z0) scale = std::max(scale, std::abs(v));
    for (double v : c.z1) scale = std::max(scale, std::abs(v));
    const double shift = c.z1[0] - c.z0[0];
    for (std::size_t i = 1; i < c.particles(); ++i)
        if (std::abs((c.z1[i] - c.z0[i]) - shift) > tol * scale) return false;
    return true;
}

struct StrictnessReport {
    ConvexityProfile profile;
    double scale = 1.0;
    double threshold = 0.0;
    double min_second_difference = 0.0;
    bool strictly_convex = false;
};

/// Checks strict convexity of V along a 1-D McCann geodesic on a 9-point grid:
/// every interior second difference must exceed theta = relative_threshold * scale.
[[nodiscard]] inline StrictnessReport strictness_probe(const GeodesicCurve& curve, const DiscreteMeasure& mu,
                                                       const DiscreteMeasure& nu, double relative_threshold = 1e-6,
                                                       const BassConfig& cfg = {}) {
    if (curve.dim != 1 || mu.dim() != 1 || nu.dim() != 1) throw Error(Errc::DimensionNotOne, "strictness probe is 1-D");
    if (compact(normalize(nu)).size() == 1) throw Error(Errc::NuIsDirac, "nu is a Dirac mass; V is affine along geodesics");
    if (are_translates_1d(curve.alpha0, curve.alpha1))
        throw Error(Errc::EndpointsAreTranslates, "endpoints are translates; V is constant along the geodesic");
    StrictnessReport r;
    r.profile = convexity_profile(Functional::V, curve, mu, nu, uniform_grid(9), cfg);
    r.scale = profile_scale(r.profile);
    r.threshold = relative_threshold * r.scale;
    r.min_second_difference = r.profile.min_second_difference;
    r.strictly_convex = r.min_second_difference > r.threshold;
    return r;
}

struct MixtureWitness {
    bool found = false;
    DiscreteMeasure alpha0, alpha1, mu, nu;
    ConvexityProfile profile;
    double scale = 1.0;
    double relative_min = 0.0;  // min second difference / scale
    std::size_t trials = 0;
};

/// Random search for a linear mixture of two Dirac masses along which V has an
/// interior second difference below -relative_bound * scale. Instances draw mu as a
/// Dirac at 0 or a symmetric two-point law and nu as a random symmetric law that
/// dominates it.
[[nodiscard]] inline MixtureWitness find_linear_nonconvexity(std::uint64_t seed, std::size_t max_trials = 200,
                                                             double relative_bound = 1e-3, const BassConfig& cfg = {}) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    MixtureWitness best;
    best.relative_min = std::numeric_limits<double>::infinity();
    const Vec grid = uniform_grid(9);
    for (std::size_t t = 0; t < max_trials; ++t) {
        const double a = -3.0 + 6.0 * unif(gen);
        const double b = -3.0 + 6.0 * unif(gen);
        const double spread_mu = unif(gen) < 0.5 ? 0.0 : unif(gen);
        const double spread_nu = spread_mu + 0.2 + 2.0 * unif(gen);
        const DiscreteMeasure mu = spread_mu == 0.0 ? DiscreteMeasure::line({0.0}, {1.0})
                                                    : DiscreteMeasure::line({-spread_mu, spread_mu}, {0.5, 0.5});
        const DiscreteMeasure nu = DiscreteMeasure::line({-spread_nu, spread_nu}, {0.5, 0.5});
        const DiscreteMeasure a0 = DiscreteMeasure::line({a}, {1.0}), a1 = DiscreteMeasure::line({b}, {1.0});
        ConvexityProfile p = linear_mixture_profile(a0, a1, mu, nu, grid, cfg);
        const double scale = profile_scale(p);
        const double rel = p.min_second_difference / scale;
        ++best.trials;
        if (rel < best.relative_min) {
            best.relative_min = rel;
            best.alpha0 = a0;
            best.alpha1 = a1;
            best.mu = mu;
            best.nu = nu;
            best.profile = std::move(p);
            best.scale = scale;
        }
        if (best.relative_min < -relative_bound) {
            best.found = true;
            break;
        }
    }
    return best;
}

}  // namespace bassmbb

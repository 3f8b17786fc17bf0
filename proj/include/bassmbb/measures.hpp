#pragma once

// Discrete probability measures on R^d, Gauss-Hermite quadrature for the
// standard Gaussian, and Gaussian smoothing by finite mixtures.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bassmbb/errors.hpp"

namespace bassmbb {

using Vec = std::vector<double>;

/// Weighted point cloud in R^d. Coordinates are stored row-major (atom by atom).
///
/// Construction checks shape, finiteness and nonnegativity; it does not rescale.
/// Use `normalize` to obtain a probability measure.
class DiscreteMeasure {
public:
    DiscreteMeasure() = default;

    DiscreteMeasure(std::size_t dim, Vec coords, Vec weights)
        : dim_(dim), coords_(std::move(coords)), weights_(std::move(weights)) {
        if (dim_ == 0) throw Error(Errc::InvalidArgument, "dimension must be >= 1");
        if (coords_.size() != weights_.size() * dim_)
            throw Error(Errc::DimensionMismatch, "coordinate count is not n * d");
        for (double c : coords_)
            if (!std::isfinite(c)) throw Error(Errc::NonFinite, "non-finite coordinate");
        for (double w : weights_) {
            if (!std::isfinite(w)) throw Error(Errc::NonFinite, "non-finite weight");
            if (w < 0.0) throw Error(Errc::InvalidArgument, "negative weight");
        }
    }

    /// One-dimensional measure from positions and weights.
    static DiscreteMeasure line(Vec points, Vec weights) {
        return DiscreteMeasure(1, std::move(points), std::move(weights));
    }

    /// Uniform weights over the given atoms.
    static DiscreteMeasure uniform(std::size_t dim, Vec coords) {
        const std::size_t n = dim == 0 ? 0 : coords.size() / dim;
        if (n == 0) throw Error(Errc::AllZeroWeights, "empty point set");
        return DiscreteMeasure(dim, std::move(coords), Vec(n, 1.0 / static_cast<double>(n)));
    }

    static DiscreteMeasure dirac(std::span<const double> at) {
        return DiscreteMeasure(at.size(), Vec(at.begin(), at.end()), Vec{1.0});
    }

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
    [[nodiscard]] bool empty() const noexcept { return weights_.empty(); }

    [[nodiscard]] std::span<const double> point(std::size_t i) const noexcept {
        return {coords_.data() + i * dim_, dim_};
    }
    [[nodiscard]] std::span<double> point(std::size_t i) noexcept { return {coords_.data() + i * dim_, dim_}; }
    [[nodiscard]] double weight(std::size_t i) const noexcept { return weights_[i]; }

    [[nodiscard]] const Vec& coords() const noexcept { return coords_; }
    [[nodiscard]] const Vec& weights() const noexcept { return weights_; }
    [[nodiscard]] Vec& mutable_coords() noexcept { return coords_; }

    [[nodiscard]] double total_mass() const noexcept {
        return std::accumulate(weights_.begin(), weights_.end(), 0.0);
    }

private:
    std::size_t dim_ = 1;
    Vec coords_;
    Vec weights_;
};

/// Diagonal-covariance Gaussian.
struct GaussianSpec {
    Vec mean;
    Vec variances;

    [[nodiscard]] std::size_t dim() const noexcept { return mean.size(); }
};

/// Discretization of the standard Gaussian gamma on R^d: nodes and positive weights
/// summing to one. Gauss-Hermite rules are symmetric under negation.
struct QuadratureRule {
    std::size_t dim = 1;
    Vec nodes;  // row-major, size() * dim
    Vec weights;

    [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }
    [[nodiscard]] std::span<const double> node(std::size_t j) const noexcept {
        return {nodes.data() + j * dim, dim};
    }
};

namespace detail {

// Physicists' Gauss-Hermite nodes/weights by Newton iteration on the orthonormal
// recurrence, seeded with the usual asymptotic guesses.
inline void hermite_physicists(std::size_t n, Vec& x, Vec& w) {
    constexpr double pim4 = 0.7511255444649425;  // pi^{-1/4}
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const std::size_t half = (n + 1) / 2;
    const double nd = static_cast<double>(n);
    double z = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * nd + 1.0) - 1.85575 * std::pow(2.0 * nd + 1.0, -0.16667);
        else if (i == 1)
            z -= 1.14 * std::pow(nd, 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * x[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * x[1];
        else
            z = 2.0 * z - x[i - 2];
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = pim4;
            double p2 = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                const double jd = static_cast<double>(j);
                p1 = z * std::sqrt(2.0 / jd) * p2 - std::sqrt((jd - 1.0) / jd) * p3;
            }
            pp = std::sqrt(2.0 * nd) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
}

}  // namespace detail

/// Probabilists' Gauss-Hermite rule for the standard Gaussian on R (exact for
/// polynomials of degree < 2n).
[[nodiscard]] inline QuadratureRule gauss_hermite_1d(std::size_t n) {
    if (n < 1) throw Error(Errc::InvalidArgument, "quadrature needs at least one node");
    Vec x, w;
    detail::hermite_physicists(n, x, w);
    QuadratureRule rule;
    rule.dim = 1;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    // Ascending order; the Newton pass produces descending nodes.
    for (std::size_t i = 0; i < n; ++i) {
        rule.nodes[i] = std::numbers::sqrt2 * x[n - 1 - i];
        rule.weights[i] = w[n - 1 - i];
    }
    const double s = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
    for (double& v : rule.weights) v /= s;
    return rule;
}

/// Tensor-product Gauss-Hermite rule with `n_per_axis` nodes per coordinate.
[[nodiscard]] inline QuadratureRule gauss_hermite(std::size_t dim, std::size_t n_per_axis) {
    if (dim == 0) throw Error(Errc::InvalidArgument, "dimension must be >= 1");
    const QuadratureRule base = gauss_hermite_1d(n_per_axis);
    std::size_t total = 1;
    for (std::size_t k = 0; k < dim; ++k) total *= n_per_axis;
    QuadratureRule rule;
    rule.dim = dim;
    rule.nodes.resize(total * dim);
    rule.weights.resize(total);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx;
        double w = 1.0;
        for (std::size_t k = dim; k-- > 0;) {
            const std::size_t a = rem % n_per_axis;
            rem /= n_per_axis;
            rule.nodes[idx * dim + k] = base.nodes[a];
            w *= base.weights[a];
        }
        rule.weights[idx] = w;
    }
    return rule;
}

/// Rescales weights to sum to one and drops zero-weight atoms.
[[nodiscard]] inline DiscreteMeasure normalize(const DiscreteMeasure& m) {
    for (double c : m.coords())
        if (!std::isfinite(c)) throw Error(Errc::NonFinite, "non-finite coordinate");
    double total = 0.0;
    for (double w : m.weights()) {
        if (!std::isfinite(w)) throw Error(Errc::NonFinite, "non-finite weight");
        total += w;
    }
    if (!(total > 0.0)) throw Error(Errc::AllZeroWeights, "all weights are zero");
    Vec coords, weights;
    coords.reserve(m.coords().size());
    weights.reserve(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m.weight(i) <= 0.0) continue;
        const auto p = m.point(i);
        coords.insert(coords.end(), p.begin(), p.end());
        weights.push_back(m.weight(i) / total);
    }
    return DiscreteMeasure(m.dim(), std::move(coords), std::move(weights));
}

/// Throws unless `m` is nonempty with unit total mass (within 1e-9).
inline void require_probability(const DiscreteMeasure& m, const char* name = "measure") {
    if (m.empty()) throw Error(Errc::AllZeroWeights, std::string(name) + " is empty");
    if (std::abs(m.total_mass() - 1.0) > 1e-9)
        throw Error(Errc::InvalidArgument, std::string(name) + " is not normalized");
}

inline void require_same_dim(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    if (a.dim() != b.dim()) throw Error(Errc::DimensionMismatch, "measures live in different dimensions");
}

[[nodiscard]] inline Vec barycenter(const DiscreteMeasure& m) {
    Vec b(m.dim(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto p = m.point(i);
        for (std::size_t k = 0; k < m.dim(); ++k) b[k] += m.weight(i) * p[k];
    }
    return b;
}

[[nodiscard]] inline double second_moment(const DiscreteMeasure& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        double r2 = 0.0;
        for (double c : m.point(i)) r2 += c * c;
        s += m.weight(i) * r2;
    }
    return s;
}

[[nodiscard]] inline DiscreteMeasure translate(const DiscreteMeasure& m, std::span<const double> shift) {
    if (shift.size() != m.dim()) throw Error(Errc::DimensionMismatch, "shift dimension");
    Vec coords = m.coords();
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t k = 0; k < m.dim(); ++k) coords[i * m.dim() + k] += shift[k];
    return DiscreteMeasure(m.dim(), std::move(coords), m.weights());
}

/// Linear (weight) mixture (1-u) a + u b on the union of supports.
[[nodiscard]] inline DiscreteMeasure mixture(const DiscreteMeasure& a, const DiscreteMeasure& b, double u) {
    require_same_dim(a, b);
    if (!(u >= 0.0 && u <= 1.0)) throw Error(Errc::InvalidArgument, "mixture parameter outside [0,1]");
    Vec coords = a.coords();
    coords.insert(coords.end(), b.coords().begin(), b.coords().end());
    Vec weights;
    weights.reserve(a.size() + b.size());
    for (double w : a.weights()) weights.push_back((1.0 - u) * w);
    for (double w : b.weights()) weights.push_back(u * w);
    return normalize(DiscreteMeasure(a.dim(), std::move(coords), std::move(weights)));
}

/// alpha * gamma^t as the finite mixture {x_i + sqrt(t) node_j} with weights w_i rw_j.
/// Atoms are laid out atom-major: output index i * rule.size() + j. A positive
/// `prune_below` drops product weights under that threshold and renormalizes.
[[nodiscard]] inline DiscreteMeasure gaussian_smooth(const DiscreteMeasure& m, double t, const QuadratureRule& rule,
                                                     double prune_below = 0.0) {
    if (!(t > 0.0) || !std::isfinite(t)) throw Error(Errc::InvalidArgument, "smoothing time must be positive");
    if (rule.dim != m.dim()) throw Error(Errc::DimensionMismatch, "quadrature dimension differs from measure");
    const std::size_t d = m.dim();
    const std::size_t q = rule.size();
    const double s = std::sqrt(t);
    Vec coords(m.size() * q * d);
    Vec weights(m.size() * q);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto p = m.point(i);
        for (std::size_t j = 0; j < q; ++j) {
            const auto node = rule.node(j);
            double* out = coords.data() + (i * q + j) * d;
            for (std::size_t k = 0; k < d; ++k) out[k] = p[k] + s * node[k];
            weights[i * q + j] = m.weight(i) * rule.weights[j];
        }
    }
    if (prune_below > 0.0) {
        for (double& w : weights)
            if (w < prune_below) w = 0.0;
        return normalize(DiscreteMeasure(d, std::move(coords), std::move(weights)));
    }
    return DiscreteMeasure(d, std::move(coords), std::move(weights));
}

/// Tensor Gauss-Hermite discretization of a diagonal Gaussian.
[[nodiscard]] inline DiscreteMeasure discretize_gaussian(const GaussianSpec& g, std::size_t n_per_axis) {
    if (n_per_axis < 2) throw Error(Errc::InvalidArgument, "need at least two nodes per axis");
    if (g.mean.empty() || g.mean.size() != g.variances.size())
        throw Error(Errc::DimensionMismatch, "mean and variance dimensions differ");
    for (double v : g.variances)
        if (!(v > 0.0) || !std::isfinite(v)) throw Error(Errc::InvalidArgument, "variances must be positive");
    const QuadratureRule rule = gauss_hermite(g.dim(), n_per_axis);
    const std::size_t d = g.dim();
    Vec coords(rule.nodes.size());
    for (std::size_t j = 0; j < rule.size(); ++j)
        for (std::size_t k = 0; k < d; ++k)
            coords[j * d + k] = g.mean[k] + std::sqrt(g.variances[k]) * rule.nodes[j * d + k];
    return DiscreteMeasure(d, std::move(coords), rule.weights);
}

/// Convenience: one-dimensional N(mean, variance).
[[nodiscard]] inline DiscreteMeasure gaussian_1d(double mean, double variance, std::size_t nodes) {
    return discretize_gaussian(GaussianSpec{{mean}, {variance}}, nodes);
}

/// Standard normal quantile by Newton iteration on erfc.
[[nodiscard]] inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(Errc::InvalidArgument, "quantile level must lie in (0, 1)");
    double x = 0.0;
    for (int it = 0; it < 100; ++it) {
        const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        const double dx = (cdf - p) / std::max(pdf, 1e-300);
        x -= std::clamp(dx, -1.0, 1.0);
        if (std::abs(dx) < 1e-14) break;
    }
    return x;
}

namespace detail {

// Midpoint quantiles of N(0, 1), rescaled to unit second moment.
inline Vec unit_quantile_nodes(std::size_t n) {
    Vec z(n);
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
        m2 += z[i] * z[i];
    }
    const double s = std::sqrt(static_cast<double>(n) / m2);
    for (double& v : z) v *= s;
    return z;
}

}  // namespace detail

/// Equal-weight N(mean, variance) on the midpoint quantiles (i + 1/2)/n, rescaled
/// so the variance is exact. Unlike Gauss-Hermite, no atom has negligible mass.
[[nodiscard]] inline DiscreteMeasure gaussian_quantiles_1d(double mean, double variance, std::size_t n) {
    if (n < 2) throw Error(Errc::InvalidArgument, "need at least two atoms");
    if (!(variance > 0.0) || !std::isfinite(variance)) throw Error(Errc::InvalidArgument, "variance must be positive");
    Vec z = detail::unit_quantile_nodes(n);
    const double s = std::sqrt(variance);
    for (double& v : z) v = mean + s * v;
    return DiscreteMeasure::uniform(1, std::move(z));
}

/// Tensor rule with equal-weight quantile nodes per axis. Exact only for the first
/// two moments, but its error on step-like integrands is bounded by the node
/// weight, where Gauss-Hermite can be off by its largest weight.
[[nodiscard]] inline QuadratureRule quantile_rule(std::size_t dim, std::size_t n_per_axis) {
    if (dim == 0) throw Error(Errc::InvalidArgument, "dimension must be >= 1");
    if (n_per_axis < 2) throw Error(Errc::InvalidArgument, "need at least two nodes per axis");
    const Vec z = detail::unit_quantile_nodes(n_per_axis);
    std::size_t total = 1;
    for (std::size_t k = 0; k < dim; ++k) total *= n_per_axis;
    QuadratureRule rule;
    rule.dim = dim;
    rule.nodes.resize(total * dim);
    rule.weights.assign(total, 1.0 / static_cast<double>(total));
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx;
        for (std::size_t k = dim; k-- > 0;) {
            rule.nodes[idx * dim + k] = z[rem % n_per_axis];
            rem /= n_per_axis;
        }
    }
    return rule;
}

/// Merges coincident atoms (exact coordinate equality) and sorts lexicographically.
[[nodiscard]] inline DiscreteMeasure compact(const DiscreteMeasure& m) {
    const std::size_t d = m.dim();
    std::vector<std::size_t> order(m.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto pa = m.point(a), pb = m.point(b);
        return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
    });
    Vec coords, weights;
    for (std::size_t idx : order) {
        const auto p = m.point(idx);
        if (!weights.empty() && std::equal(p.begin(), p.end(), coords.end() - static_cast<std::ptrdiff_t>(d))) {
            weights.back() += m.weight(idx);
            continue;
        }
        coords.insert(coords.end(), p.begin(), p.end());
        weights.push_back(m.weight(idx));
    }
    return DiscreteMeasure(d, std::move(coords), std::move(weights));
}

}  // namespace bassmbb

#pragma once

// Piecewise-linear convex functions on R and their exact discrete Legendre transform.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "bassmbb/errors.hpp"
#include "bassmbb/measures.hpp"

namespace bassmbb {

/// Convex function given by its values on a strictly increasing grid, linear
/// between knots. Outside [grid.front(), grid.back()] it is either +inf
/// (`bounded_domain`) or extended linearly with `left_slope` / `right_slope`.
struct ConvexPotential1D {
    Vec grid;
    Vec values;
    bool bounded_domain = true;
    double left_slope = 0.0;
    double right_slope = 0.0;

    [[nodiscard]] bool contains(double x) const noexcept {
        return !bounded_domain || (x >= grid.front() && x <= grid.back());
    }

    [[nodiscard]] double operator()(double x) const noexcept {
        if (x < grid.front()) {
            if (bounded_domain) return std::numeric_limits<double>::infinity();
            return values.front() + left_slope * (x - grid.front());
        }
        if (x > grid.back()) {
            if (bounded_domain) return std::numeric_limits<double>::infinity();
            return values.back() + right_slope * (x - grid.back());
        }
        const auto it = std::upper_bound(grid.begin(), grid.end(), x);
        if (it == grid.end()) return values.back();
        const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
        if (hi == 0) return values.front();
        const std::size_t lo = hi - 1;
        const double t = (x - grid[lo]) / (grid[hi] - grid[lo]);
        return values[lo] + t * (values[hi] - values[lo]);
    }
};

namespace detail {

/// Indices of the lower convex hull of (x_i, y_i), x strictly increasing (monotone chain).
inline std::vector<std::size_t> lower_hull(std::span<const double> x, std::span<const double> y) {
    std::vector<std::size_t> h;
    h.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        while (h.size() >= 2) {
            const std::size_t a = h[h.size() - 2], b = h.back();
            // Drop b if it lies on or above the chord a -> i.
            const double cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]);
            if (cross <= 0.0)
                h.pop_back();
            else
                break;
        }
        h.push_back(i);
    }
    return h;
}

inline void require_grid(std::span<const double> grid, std::span<const double> values) {
    if (grid.size() < 2) throw Error(Errc::DegenerateGrid, "need at least two grid points");
    if (grid.size() != values.size()) throw Error(Errc::DimensionMismatch, "grid and values differ in length");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw Error(Errc::DegenerateGrid, "grid must be strictly increasing");
    for (double v : values)
        if (!std::isfinite(v)) throw Error(Errc::NonFinite, "non-finite potential value");
}

}  // namespace detail

/// Replaces the values by their lower convex envelope on the same grid.
[[nodiscard]] inline ConvexPotential1D convex_envelope(ConvexPotential1D psi) {
    detail::require_grid(psi.grid, psi.values);
    const auto h = detail::lower_hull(psi.grid, psi.values);
    Vec env(psi.grid.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < psi.grid.size(); ++i) {
        while (k + 1 < h.size() && psi.grid[h[k + 1]] < psi.grid[i]) ++k;
        if (k + 1 == h.size() || psi.grid[h[k]] == psi.grid[i]) {
            env[i] = psi.values[h[k]];
            continue;
        }
        const std::size_t a = h[k], b = h[k + 1];
        const double t = (psi.grid[i] - psi.grid[a]) / (psi.grid[b] - psi.grid[a]);
        env[i] = psi.values[a] + t * (psi.values[b] - psi.values[a]);
    }
    psi.values = std::move(env);
    return psi;
}

/// Exact convex conjugate psi*(y) = sup_x (x y - psi(x)) of a piecewise-linear function.
///
/// A bounded-domain input yields a conjugate finite on all of R with tail slopes
/// equal to the domain ends; an input with linear tails yields a conjugate that is
/// +inf outside [left_slope, right_slope]. Knots of the output are the slopes of the
/// input's lower hull, so the work is linear after the hull pass.
[[nodiscard]] inline ConvexPotential1D legendre_transform(const ConvexPotential1D& psi) {
    detail::require_grid(psi.grid, psi.values);
    const auto h = detail::lower_hull(psi.grid, psi.values);
    Vec slopes;
    slopes.reserve(h.size());
    for (std::size_t k = 0; k + 1 < h.size(); ++k)
        slopes.push_back((psi.values[h[k + 1]] - psi.values[h[k]]) / (psi.grid[h[k + 1]] - psi.grid[h[k]]));

    // psi*(s_k) is attained at hull vertex k (and k + 1).
    auto conj_at_vertex = [&](double y, std::size_t k) { return y * psi.grid[h[k]] - psi.values[h[k]]; };

    ConvexPotential1D out;
    if (psi.bounded_domain) {
        const double pad = 1.0 + (slopes.empty() ? 0.0 : slopes.back() - slopes.front());
        const double lo = slopes.front() - pad;
        const double hi = slopes.back() + pad;
        out.grid.push_back(lo);
        out.values.push_back(conj_at_vertex(lo, 0));
        for (std::size_t k = 0; k < slopes.size(); ++k) {
            if (slopes[k] <= out.grid.back()) continue;
            out.grid.push_back(slopes[k]);
            out.values.push_back(conj_at_vertex(slopes[k], k));
        }
        out.grid.push_back(hi);
        out.values.push_back(conj_at_vertex(hi, h.size() - 1));
        out.bounded_domain = false;
        out.left_slope = psi.grid[h.front()];
        out.right_slope = psi.grid[h.back()];
        return out;
    }

    const double lo = psi.left_slope, hi = psi.right_slope;
    if (!(lo <= slopes.front() + 1e-12) || !(hi >= slopes.back() - 1e-12))
        throw Error(Errc::InvalidArgument, "tail slopes inconsistent with convexity");
    // On [lo, hi] the supremum is attained at a hull vertex.
    auto conj = [&](double y) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < h.size(); ++k) best = std::max(best, conj_at_vertex(y, k));
        return best;
    };
    out.grid.push_back(lo);
    out.values.push_back(conj(lo));
    for (std::size_t k = 0; k < slopes.size(); ++k) {
        if (slopes[k] <= out.grid.back() || slopes[k] >= hi) continue;
        out.grid.push_back(slopes[k]);
        out.values.push_back(conj_at_vertex(slopes[k], k));
    }
    if (hi > out.grid.back()) {
        out.grid.push_back(hi);
        out.values.push_back(conj(hi));
    } else if (out.grid.size() == 1) {
        // Degenerate domain {lo}: keep a two-point grid.
        out.grid.push_back(lo + 1e-12);
        out.values.push_back(conj(lo + 1e-12));
    }
    out.bounded_domain = true;
    return out;
}

/// Conjugate of the function given by `values` on a sorted grid (+inf off the grid span).
[[nodiscard]] inline ConvexPotential1D legendre_transform_1d(std::span<const double> grid, std::span<const double> values) {
    ConvexPotential1D psi;
    psi.grid.assign(grid.begin(), grid.end());
    psi.values.assign(values.begin(), values.end());
    psi.bounded_domain = true;
    return legendre_transform(psi);
}

}  // namespace bassmbb

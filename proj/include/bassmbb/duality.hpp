#pragma once

// Dual objective D(psi) = int psi dnu - int (psi* * gamma)* dmu for convex psi on
// the line, the candidate psi-hat = v-hat* recovered from a solved Bass measure,
// and the resulting duality gap.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "bassmbb/bass_core.hpp"
#include "bassmbb/errors.hpp"
#include "bassmbb/legendre.hpp"
#include "bassmbb/martingale.hpp"
#include "bassmbb/measures.hpp"

namespace bassmbb {

/// (f * gamma)(x) = sum_j w_j f(x + node_j) for a finite piecewise-linear f, built
/// exactly: its knots are the shifted knots b_k - node_j and its tails keep the
/// slopes of f.
[[nodiscard]] inline ConvexPotential1D smooth_potential(const ConvexPotential1D& f, const QuadratureRule& rule) {
    if (f.bounded_domain) throw Error(Errc::InvalidArgument, "smoothing needs a potential finite on all of R");
    if (rule.dim != 1) throw Error(Errc::DimensionNotOne, "potential smoothing is one-dimensional");
    Vec grid;
    grid.reserve(f.grid.size() * rule.size());
    for (double b : f.grid)
        for (double n : rule.nodes) grid.push_back(b - n);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end(), [](double a, double b) { return b - a <= 1e-13 * (1.0 + std::abs(a)); }),
               grid.end());
    ConvexPotential1D out;
    out.bounded_domain = false;
    out.left_slope = f.left_slope;
    out.right_slope = f.right_slope;
    out.values.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < rule.size(); ++j) s += rule.weights[j] * f(grid[i] + rule.nodes[j]);
        out.values[i] = s;
    }
    if (grid.size() == 1) {
        grid.push_back(grid[0] + 1.0);
        out.values.push_back(out.values[0] + f.right_slope);
    }
    out.grid = std::move(grid);
    return out;
}

struct DualEvaluation {
    double value = 0.0;        // D(psi)
    double nu_term = 0.0;      // int psi dnu
    double mu_term = 0.0;      // int (psi* * gamma)* dmu
    ConvexPotential1D smoothed_conjugate;  // psi* * gamma
    ConvexPotential1D inner;               // (psi* * gamma)*
};

/// D(psi) for convex psi given on a grid (+inf off the grid when bounded). Needs d = 1
/// and the support of nu inside the domain of psi.
[[nodiscard]] inline DualEvaluation dual_objective_report(const ConvexPotential1D& psi_in, const DiscreteMeasure& mu_in,
                                                          const DiscreteMeasure& nu_in, const QuadratureRule& rule) {
    if (mu_in.dim() != 1 || nu_in.dim() != 1) throw Error(Errc::DimensionNotOne, "dual objective is evaluated in d = 1");
    const DiscreteMeasure mu = normalize(mu_in), nu = normalize(nu_in);
    const ConvexPotential1D psi = convex_envelope(psi_in);
    const double tol = 1e-12 * (1.0 + std::abs(psi.grid.front()) + std::abs(psi.grid.back()));
    for (std::size_t j = 0; j < nu.size(); ++j) {
        const double y = nu.point(j)[0];
        if (psi.bounded_domain && (y < psi.grid.front() - tol || y > psi.grid.back() + tol))
            throw Error(Errc::SupportOutsideGrid, "nu has an atom at " + std::to_string(y) + " outside the grid of psi");
    }
    if (!psi.bounded_domain)
        throw Error(Errc::InvalidArgument, "psi must be +inf off its grid (its conjugate is then finite)");

    DualEvaluation ev;
    ev.smoothed_conjugate = smooth_potential(legendre_transform(psi), rule);
    ev.inner = legendre_transform(ev.smoothed_conjugate);
    for (std::size_t j = 0; j < nu.size(); ++j)
        ev.nu_term += nu.weight(j) * psi(std::clamp(nu.point(j)[0], psi.grid.front(), psi.grid.back()));
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double x = mu.point(i)[0];
        const double v = ev.inner(x);
        if (!std::isfinite(v)) {
            ev.mu_term = std::numeric_limits<double>::infinity();
            break;
        }
        ev.mu_term += mu.weight(i) * v;
    }
    ev.value = ev.nu_term - ev.mu_term;
    return ev;
}

[[nodiscard]] inline double dual_objective(const ConvexPotential1D& psi, const DiscreteMeasure& mu,
                                           const DiscreteMeasure& nu, const QuadratureRule& rule) {
    return dual_objective_report(psi, mu, nu, rule).value;
}

/// v-hat from the sampled grad v-hat by trapezoid integration along the sorted
/// knots (v-hat = 0 at the first knot), extended linearly past the end knots.
[[nodiscard]] inline ConvexPotential1D integrate_map_1d(const MapSamples& grad) {
    if (grad.dim() != 1) throw Error(Errc::DimensionNotOne, "potential recovery is one-dimensional");
    const Vec& x = grad.knots();
    const Vec& g = grad.knot_values();
    for (std::size_t k = 1; k < g.size(); ++k)
        if (g[k] < g[k - 1] - 1e-10 * (1.0 + std::abs(g[k - 1])))
            throw Error(Errc::NonMonotoneSamples, "sampled gradient decreases between knots " + std::to_string(k - 1) +
                                                      " and " + std::to_string(k));
    ConvexPotential1D v;
    v.bounded_domain = false;
    v.left_slope = g.front();
    v.right_slope = g.back();
    if (x.size() == 1) {
        v.grid = {x[0], x[0] + 1.0};
        v.values = {0.0, g[0]};
        return v;
    }
    v.grid = x;
    v.values.assign(x.size(), 0.0);
    for (std::size_t k = 1; k < x.size(); ++k)
        v.values[k] = v.values[k - 1] + 0.5 * (x[k] - x[k - 1]) * (g[k] + g[k - 1]);
    return v;
}

/// psi-hat = v-hat*, with v-hat integrated from the solution's sampled map.
[[nodiscard]] inline ConvexPotential1D candidate_from_solution(const BassSolution& sol) {
    return legendre_transform(integrate_map_1d(sol.v_map));
}

struct DualityGapReport {
    double dual_value = 0.0;
    double primal_value = 0.0;
    double gap = 0.0;  // dual - primal
    double psi_grid_lo = 0.0;
    double psi_grid_hi = 0.0;
    bool weak_duality_violated = false;
};

[[nodiscard]] inline DualityGapReport duality_gap(const ConvexPotential1D& psi, double primal, const DiscreteMeasure& mu,
                                                  const DiscreteMeasure& nu, const QuadratureRule& rule,
                                                  double tolerance = 1e-9) {
    DualityGapReport r;
    r.dual_value = dual_objective(psi, mu, nu, rule);
    r.primal_value = primal;
    r.gap = r.dual_value - primal;
    r.psi_grid_lo = psi.grid.front();
    r.psi_grid_hi = psi.grid.back();
    r.weak_duality_violated = r.gap < -tolerance;
    return r;
}

/// Gap between D(psi-hat) and the static value P-tilde of the solution.
[[nodiscard]] inline DualityGapReport duality_gap(const BassSolution& sol, const DiscreteMeasure& mu,
                                                  const DiscreteMeasure& nu, double tolerance = 1e-9) {
    const BassMartingaleModel model = BassMartingaleModel::from_solution(sol, 0, sol.rule);
    const double primal = static_value(model, mu, sol.rule).value;
    return duality_gap(candidate_from_solution(sol), primal, mu, nu, sol.rule, tolerance);
}

}  // namespace bassmbb

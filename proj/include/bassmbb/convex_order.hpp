#pragma once

// Convex-order test mu <=_c nu for discrete measures.
//
// d = 1: equal means and E(X - k)^+ <= E(Y - k)^+ at every atom location k of
// either support (both call functions are piecewise linear with kinks there).
// Any d: feasibility of a martingale coupling (Strassen), solved as a phase-one
// linear program with a dense tableau simplex.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bassmbb/errors.hpp"
#include "bassmbb/measures.hpp"

namespace bassmbb {

namespace lp {

struct FeasibilityResult {
    bool feasible = false;
    Vec x;                  // a feasible point when `feasible`
    double infeasibility = 0.0;  // optimal phase-one objective (sum of artificials)
    std::size_t pivots = 0;
};

/// Finds x >= 0 with A x = b (A dense row-major, rows x cols) by phase-one simplex.
[[nodiscard]] inline FeasibilityResult find_feasible_point(std::size_t rows, std::size_t cols, std::span<const double> A,
                                                           std::span<const double> b, double tol = 1e-10) {
    if (A.size() != rows * cols || b.size() != rows) throw Error(Errc::DimensionMismatch, "LP shape");
    const std::size_t width = cols + rows + 1;  // originals, artificials, rhs
    std::vector<double> T((rows + 1) * width, 0.0);
    auto at = [&](std::size_t r, std::size_t c) -> double& { return T[r * width + c]; };
    std::vector<std::size_t> basis(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double sign = b[r] < 0.0 ? -1.0 : 1.0;
        for (std::size_t c = 0; c < cols; ++c) at(r, c) = sign * A[r * cols + c];
        at(r, cols + r) = 1.0;
        at(r, width - 1) = sign * b[r];
        basis[r] = cols + r;
    }
    // Objective row holds reduced costs of "minimize sum of artificials".
    for (std::size_t c = 0; c < cols; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows; ++r) s += at(r, c);
        at(rows, c) = -s;
    }
    {
        double s = 0.0;
        for (std::size_t r = 0; r < rows; ++r) s += at(r, width - 1);
        at(rows, width - 1) = -s;
    }

    FeasibilityResult res;
    std::size_t degenerate_streak = 0;
    const std::size_t max_pivots = 50 * (rows + cols) + 1000;
    for (;;) {
        const bool bland = degenerate_streak > rows + 10;
        std::size_t enter = width;
        double best = -tol;
        for (std::size_t c = 0; c + 1 < width; ++c) {
            const double rc = at(rows, c);
            if (rc < best) {
                enter = c;
                if (bland) break;
                best = rc;
            }
        }
        if (enter == width) break;
        std::size_t leave = rows;
        double ratio = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < rows; ++r) {
            const double a = at(r, enter);
            if (a <= tol) continue;
            const double q = at(r, width - 1) / a;
            if (q < ratio - 1e-15 || (q <= ratio + 1e-15 && leave < rows && basis[r] < basis[leave])) {
                ratio = q;
                leave = r;
            }
        }
        if (leave == rows) break;  // unbounded direction cannot occur in phase one
        if (++res.pivots > max_pivots) throw Error(Errc::NoConvergence, "phase-one simplex pivot limit");
        degenerate_streak = ratio <= 1e-15 ? degenerate_streak + 1 : 0;

        const double piv = at(leave, enter);
        for (std::size_t c = 0; c < width; ++c) at(leave, c) /= piv;
        for (std::size_t r = 0; r <= rows; ++r) {
            if (r == leave) continue;
            const double f = at(r, enter);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < width; ++c) at(r, c) -= f * at(leave, c);
        }
        basis[leave] = enter;
    }
    res.infeasibility = -at(rows, width - 1);
    double scale = 1.0;
    for (double v : b) scale = std::max(scale, std::abs(v));
    res.feasible = res.infeasibility <= 1e-9 * scale;
    res.x.assign(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        if (basis[r] < cols) res.x[basis[r]] = std::max(0.0, at(r, width - 1));
    return res;
}

}  // namespace lp

/// A martingale coupling pi(i, j) stored dense row-major (n x m).
struct MartingaleCoupling {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec mass;
};

struct ConvexOrderCertificate {
    bool in_order = false;
    std::optional<MartingaleCoupling> coupling;  // feasible martingale coupling, when computed
    std::optional<double> violating_strike;      // call-payoff test function (x - k)^+ that fails
    double violation = 0.0;                       // E(X - k)^+ - E(Y - k)^+ at that strike, or LP infeasibility
    bool barycenter_mismatch = false;             // the linear test functions +-x fail
    std::string detail;
};

struct ConvexOrderOptions {
    bool force_lp = false;          // use the coupling LP also in d = 1
    std::size_t lp_size_cap = 2500;  // n * m limit for the dense LP
    double tolerance = 1e-9;
};

namespace detail {

inline double call_payoff(const DiscreteMeasure& m, double strike) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m.weight(i) * std::max(0.0, m.point(i)[0] - strike);
    return s;
}

}  // namespace detail

[[nodiscard]] inline MartingaleCoupling martingale_coupling_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                                              const ConvexOrderOptions& opts, double* infeasibility) {
    const std::size_t n = mu.size(), m = nu.size(), d = mu.dim();
    if (n * m > opts.lp_size_cap)
        throw Error(Errc::SizeCapExceeded, "martingale coupling LP limited to n*m <= " + std::to_string(opts.lp_size_cap));
    const std::size_t rows = n + m + n * d;
    const std::size_t cols = n * m;
    Vec A(rows * cols, 0.0), b(rows, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t v = i * m + j;
            A[i * cols + v] = 1.0;
            A[(n + j) * cols + v] = 1.0;
            for (std::size_t k = 0; k < d; ++k)
                A[(n + m + i * d + k) * cols + v] = nu.point(j)[k] - mu.point(i)[k];
        }
    for (std::size_t i = 0; i < n; ++i) b[i] = mu.weight(i);
    for (std::size_t j = 0; j < m; ++j) b[n + j] = nu.weight(j);
    const auto res = lp::find_feasible_point(rows, cols, A, b);
    if (infeasibility) *infeasibility = res.infeasibility;
    if (!res.feasible) return {};
    return MartingaleCoupling{n, m, res.x};
}

/// mu <=_c nu, with a certificate either way.
[[nodiscard]] inline ConvexOrderCertificate check_convex_order(const DiscreteMeasure& mu_in, const DiscreteMeasure& nu_in,
                                                               const ConvexOrderOptions& opts = {}) {
    require_same_dim(mu_in, nu_in);
    const DiscreteMeasure mu = normalize(mu_in);
    const DiscreteMeasure nu = normalize(nu_in);
    ConvexOrderCertificate cert;

    double scale = 1.0;
    for (double c : mu.coords()) scale = std::max(scale, std::abs(c));
    for (double c : nu.coords()) scale = std::max(scale, std::abs(c));
    const double tol = opts.tolerance * scale;

    const Vec bm = barycenter(mu), bn = barycenter(nu);
    for (std::size_t k = 0; k < bm.size(); ++k)
        if (std::abs(bm[k] - bn[k]) > tol) {
            cert.barycenter_mismatch = true;
            cert.violation = std::abs(bm[k] - bn[k]);
            cert.detail = "barycenters differ in coordinate " + std::to_string(k);
            return cert;
        }

    if (mu.dim() == 1 && !opts.force_lp) {
        double worst = -std::numeric_limits<double>::infinity();
        double worst_k = 0.0;
        for (const DiscreteMeasure* src : {&mu, &nu})
            for (std::size_t i = 0; i < src->size(); ++i) {
                const double k = src->point(i)[0];
                const double gap = detail::call_payoff(mu, k) - detail::call_payoff(nu, k);
                if (gap > worst) {
                    worst = gap;
                    worst_k = k;
                }
            }
        if (worst > tol) {
            cert.violating_strike = worst_k;
            cert.violation = worst;
            char buf[160];
            std::snprintf(buf, sizeof buf, "call payoff (x - %.6g)^+ has larger mean under mu by %.3e", worst_k, worst);
            cert.detail = buf;
            return cert;
        }
        cert.in_order = true;
        cert.violation = std::max(0.0, worst);
        cert.detail = "means agree and all call payoffs are dominated";
        return cert;
    }

    double infeas = 0.0;
    auto coupling = martingale_coupling_lp(mu, nu, opts, &infeas);
    if (coupling.mass.empty()) {
        cert.violation = infeas;
        cert.detail = "no martingale coupling exists (phase-one infeasibility " + std::to_string(infeas) + ")";
        return cert;
    }
    cert.in_order = true;
    cert.coupling = std::move(coupling);
    cert.detail = "feasible martingale coupling found";
    return cert;
}

}  // namespace bassmbb

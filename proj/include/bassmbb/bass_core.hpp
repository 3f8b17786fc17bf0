#pragma once

// The Bass functional V(alpha) = MCov(alpha * gamma, nu) - MCov(alpha, mu), its
// first-order field over the atoms of alpha, and a particle gradient descent
// that minimizes it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bassmbb/convex_order.hpp"
#include "bassmbb/errors.hpp"
#include "bassmbb/measures.hpp"
#include "bassmbb/ot_core.hpp"

namespace bassmbb {

struct BassConfig {
    std::size_t quadrature_nodes = 0;  // per axis; 0 picks 32 in d = 1, 16 in d = 2, 6 beyond
    double step0 = 1.0;
    double backtrack = 0.5;
    double step_growth = 2.0;
    double step_max = 1e4;
    double armijo = 1e-4;
    std::size_t max_iter = 3000;
    double tol = 1e-2;  // on the L2(alpha) norm of the first-order field
    bool recenter = true;
    double spread_threshold = 50.0;
    std::size_t spread_window = 5;
    bool skip_order_check = false;
    OtOptions ot{};
};

[[nodiscard]] inline std::size_t default_quadrature_nodes(std::size_t dim) {
    return dim == 1 ? 32 : dim == 2 ? 16 : 6;
}

[[nodiscard]] inline QuadratureRule quadrature_for(const BassConfig& cfg, std::size_t dim) {
    return gauss_hermite(dim, cfg.quadrature_nodes ? cfg.quadrature_nodes : default_quadrature_nodes(dim));
}

/// V together with the two transport solves it was computed from.
struct VEvaluation {
    double value = 0.0;
    DiscreteMeasure smoothed;  // alpha * gamma, atom-major blocks of rule.size()
    TransportResult smooth_to_nu;
    TransportResult alpha_to_mu;
};

[[nodiscard]] inline VEvaluation evaluate_V(const DiscreteMeasure& alpha, const DiscreteMeasure& mu,
                                            const DiscreteMeasure& nu, const QuadratureRule& rule,
                                            const OtOptions& ot = {}) {
    require_same_dim(alpha, mu);
    require_same_dim(alpha, nu);
    VEvaluation ev;
    ev.smoothed = gaussian_smooth(alpha, 1.0, rule);
    ev.smooth_to_nu = mcov(ev.smoothed, nu, ot);
    ev.alpha_to_mu = mcov(alpha, mu, ot);
    ev.value = ev.smooth_to_nu.value - ev.alpha_to_mu.value;
    return ev;
}

[[nodiscard]] inline VEvaluation evaluate_V(const DiscreteMeasure& alpha, const DiscreteMeasure& mu,
                                            const DiscreteMeasure& nu, const BassConfig& cfg = {}) {
    return evaluate_V(alpha, mu, nu, quadrature_for(cfg, alpha.dim()), cfg.ot);
}

/// (grad v * gamma)(z_i) for every atom of alpha: the barycentric map of the
/// alpha * gamma -> nu solve averaged over each atom's own quadrature block.
[[nodiscard]] inline Vec smoothed_v_map(const VEvaluation& ev, const DiscreteMeasure& alpha,
                                        const DiscreteMeasure& nu, const QuadratureRule& rule) {
    const std::size_t d = alpha.dim(), q = rule.size();
    const Vec tv = brenier_map_all(ev.smooth_to_nu, nu);
    Vec out(alpha.size() * d, 0.0);
    for (std::size_t i = 0; i < alpha.size(); ++i)
        for (std::size_t j = 0; j < q; ++j)
            for (std::size_t k = 0; k < d; ++k) out[i * d + k] += rule.weights[j] * tv[(i * q + j) * d + k];
    return out;
}

/// First-order field g(z_i) = (grad v * gamma)(z_i) - grad u(z_i), row-major n x d.
/// Moving atom i by h along -g changes V by about -h w_i |g_i|^2.
[[nodiscard]] inline Vec gradient_field(const VEvaluation& ev, const DiscreteMeasure& alpha, const DiscreteMeasure& mu,
                                        const DiscreteMeasure& nu, const QuadratureRule& rule) {
    Vec g = smoothed_v_map(ev, alpha, nu, rule);
    const Vec tu = brenier_map_all(ev.alpha_to_mu, mu);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] -= tu[k];
    return g;
}

[[nodiscard]] inline Vec gradient_field(const DiscreteMeasure& alpha, const DiscreteMeasure& mu,
                                        const DiscreteMeasure& nu, const BassConfig& cfg = {}) {
    const QuadratureRule rule = quadrature_for(cfg, alpha.dim());
    return gradient_field(evaluate_V(alpha, mu, nu, rule, cfg.ot), alpha, mu, nu, rule);
}

/// Weighted L2(alpha) norm of a per-atom field.
[[nodiscard]] inline double field_norm(const DiscreteMeasure& alpha, const Vec& field) {
    const std::size_t d = alpha.dim();
    double s = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i)
        for (std::size_t k = 0; k < d; ++k) s += alpha.weight(i) * field[i * d + k] * field[i * d + k];
    return std::sqrt(s);
}

struct BassIterate {
    DiscreteMeasure alpha;
    double value = 0.0;
    Vec grad_field;
    double residual = 0.0;
};

struct TraceRecord {
    std::size_t iteration = 0;
    double value = 0.0;
    double residual = 0.0;
    double second_moment = 0.0;
    double step = 0.0;
};

enum class BassStatus { Converged, MaxIter, SpreadDetected };

[[nodiscard]] inline const char* to_string(BassStatus s) noexcept {
    switch (s) {
        case BassStatus::Converged: return "converged";
        case BassStatus::MaxIter: return "max_iter";
        case BassStatus::SpreadDetected: return "spread_detected";
    }
    return "unknown";
}

struct BassSolution {
    DiscreteMeasure alpha_hat;
    MapSamples v_map;    // grad v-hat sampled on the atoms of alpha-hat * gamma
    MapSamples phi_map;  // grad phi-hat sampled on the atoms of mu
    QuadratureRule rule;
    double value = 0.0;
    double residual = 0.0;
    std::size_t iterations = 0;
    BassStatus status = BassStatus::MaxIter;
    std::vector<TraceRecord> trace;
};

namespace detail {

inline DiscreteMeasure moved(const DiscreteMeasure& alpha, const Vec& field, double step) {
    Vec coords = alpha.coords();
    for (std::size_t k = 0; k < coords.size(); ++k) coords[k] -= step * field[k];
    return DiscreteMeasure(alpha.dim(), std::move(coords), alpha.weights());
}

inline void shift_in_place(DiscreteMeasure& m, const Vec& shift) {
    Vec& c = m.mutable_coords();
    const std::size_t d = m.dim();
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t k = 0; k < d; ++k) c[i * d + k] += shift[k];
}

}  // namespace detail

/// Assembles the sampled maps of a solution from the final evaluation.
[[nodiscard]] inline BassSolution make_solution(const DiscreteMeasure& alpha, const VEvaluation& ev,
                                                const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                                const QuadratureRule& rule) {
    BassSolution sol;
    sol.alpha_hat = alpha;
    sol.rule = rule;
    sol.value = ev.value;
    sol.v_map = MapSamples(alpha.dim(), ev.smoothed.coords(), brenier_map_all(ev.smooth_to_nu, nu));
    TransportResult back = ev.alpha_to_mu;
    back.coupling = ev.alpha_to_mu.coupling.transposed();
    sol.phi_map = MapSamples(alpha.dim(), mu.coords(), brenier_map_all(back, alpha));
    return sol;
}

using IterationObserver = std::function<void(const TraceRecord&)>;

/// Particle gradient descent z_i <- z_i - eta g(z_i) with Armijo backtracking on V.
///
/// Stops on residual <= tol (converged), on the iteration cap or a collapsed line
/// search (max_iter), or when m2(alpha) exceeds threshold * (m2(mu) + m2(nu) + 1)
/// while V is still decreasing (spread_detected: the infimum is not attained).
[[nodiscard]] inline BassSolution minimize_V(const DiscreteMeasure& mu_in, const DiscreteMeasure& nu_in,
                                             const DiscreteMeasure& alpha0, const BassConfig& cfg = {},
                                             const IterationObserver& observer = {}) {
    const DiscreteMeasure mu = normalize(mu_in);
    const DiscreteMeasure nu = normalize(nu_in);
    require_same_dim(mu, nu);
    require_same_dim(mu, alpha0);
    if (!(cfg.step0 > 0.0) || !(cfg.tol > 0.0)) throw Error(Errc::InvalidArgument, "step and tolerance must be positive");
    if (cfg.skip_order_check) {
        std::fprintf(stderr, "bassmbb: convex-order pre-check skipped\n");
    } else {
        try {
            const auto order = check_convex_order(mu, nu);
            if (!order.in_order) throw Error(Errc::ConvexOrderViolated, order.detail);
        } catch (const Error& e) {
            if (e.code() != Errc::SizeCapExceeded) throw;
            std::fprintf(stderr, "bassmbb: convex-order pre-check skipped (%s)\n", e.what());
        }
    }

    const QuadratureRule rule = quadrature_for(cfg, mu.dim());
    DiscreteMeasure alpha = normalize(alpha0);
    auto recenter = [&](DiscreteMeasure& a, VEvaluation* ev) {
        Vec b = barycenter(a);
        for (double& v : b) v = -v;
        detail::shift_in_place(a, b);
        if (ev) {
            // Couplings are unchanged by translation; only the values shift.
            detail::shift_in_place(ev->smoothed, b);
            ev->smooth_to_nu.value += dot(b, barycenter(nu));
            ev->alpha_to_mu.value += dot(b, barycenter(mu));
            ev->value = ev->smooth_to_nu.value - ev->alpha_to_mu.value;
        }
    };
    if (cfg.recenter) recenter(alpha, nullptr);

    const double spread_limit = cfg.spread_threshold * (second_moment(mu) + second_moment(nu) + 1.0);
    VEvaluation ev = evaluate_V(alpha, mu, nu, rule, cfg.ot);
    Vec grad = gradient_field(ev, alpha, mu, nu, rule);
    double residual = field_norm(alpha, grad);
    double eta = cfg.step0;

    BassSolution sol;
    std::vector<double> history{ev.value};
    auto record = [&](std::size_t it) {
        TraceRecord r{it, ev.value, residual, second_moment(alpha), eta};
        sol.trace.push_back(r);
        if (observer) observer(r);
    };
    record(0);

    BassStatus status = BassStatus::MaxIter;
    std::size_t it = 0;
    while (true) {
        if (residual <= cfg.tol) {
            status = BassStatus::Converged;
            break;
        }
        if (it >= cfg.max_iter) break;
        const double decrease = residual * residual;
        bool accepted = false;
        VEvaluation trial_ev;
        DiscreteMeasure trial;
        while (eta > 1e-12) {
            trial = detail::moved(alpha, grad, eta);
            trial_ev = evaluate_V(trial, mu, nu, rule, cfg.ot);
            if (trial_ev.value <= ev.value - cfg.armijo * eta * decrease) {
                accepted = true;
                break;
            }
            eta *= cfg.backtrack;
        }
        if (!accepted) break;
        ++it;
        alpha = std::move(trial);
        ev = std::move(trial_ev);
        if (cfg.recenter) recenter(alpha, &ev);
        grad = gradient_field(ev, alpha, mu, nu, rule);
        residual = field_norm(alpha, grad);
        record(it);
        eta = std::min(cfg.step_max, eta * cfg.step_growth);
        history.push_back(ev.value);

        if (second_moment(alpha) > spread_limit && history.size() > cfg.spread_window) {
            const double before = history[history.size() - 1 - cfg.spread_window];
            if (ev.value < before) {
                status = BassStatus::SpreadDetected;
                break;
            }
        }
    }

    BassSolution out = make_solution(alpha, ev, mu, nu, rule);
    out.residual = residual;
    out.iterations = it;
    out.status = status;
    out.trace = std::move(sol.trace);
    return out;
}

/// One step of the fixed-point map alpha <- (grad v * gamma)^{-1}(mu).
///
/// In d = 1 the sampled map z -> (grad v * gamma)(z) is inverted monotonically
/// (linear extension past the end knots). In higher dimension the image cloud is
/// coupled optimally to mu and each piece of mass is moved by the displacement
/// x - (grad v * gamma)(z), which is the inverse to first order with unit Jacobian.
[[nodiscard]] inline DiscreteMeasure fixed_point_step(const DiscreteMeasure& alpha, const DiscreteMeasure& mu,
                                                      const DiscreteMeasure& nu, const BassConfig& cfg = {}) {
    const QuadratureRule rule = quadrature_for(cfg, alpha.dim());
    const DiscreteMeasure a = normalize(alpha);
    const VEvaluation ev = evaluate_V(a, mu, nu, rule, cfg.ot);
    const Vec u = smoothed_v_map(ev, a, nu, rule);
    const std::size_t d = a.dim();

    if (d == 1) {
        const MapSamples fwd(1, a.coords(), u);
        const Vec& zs = fwd.knots();
        const Vec& us = fwd.knot_values();
        if (zs.size() == 1) {
            // Single atom: all of mu is carried to that atom.
            if (mu.size() != 1) throw Error(Errc::NonInvertibleMap, "constant map cannot be inverted onto a spread measure");
            return DiscreteMeasure::line({zs[0] + (mu.point(0)[0] - us[0])}, {1.0});
        }
        for (std::size_t k = 1; k < us.size(); ++k)
            if (!(us[k] > us[k - 1])) throw Error(Errc::NonInvertibleMap, "smoothed map is not strictly increasing");
        Vec coords(mu.size());
        for (std::size_t k = 0; k < mu.size(); ++k) {
            const double x = mu.point(k)[0];
            std::size_t hi = static_cast<std::size_t>(std::upper_bound(us.begin(), us.end(), x) - us.begin());
            hi = std::clamp<std::size_t>(hi, 1, us.size() - 1);
            const std::size_t lo = hi - 1;
            const double t = (x - us[lo]) / (us[hi] - us[lo]);
            coords[k] = zs[lo] + t * (zs[hi] - zs[lo]);
        }
        return DiscreteMeasure(1, std::move(coords), mu.weights());
    }

    const DiscreteMeasure image(d, u, a.weights());
    const TransportResult plan = mcov(image, mu, cfg.ot);
    Vec coords;
    Vec weights;
    for (const auto& e : plan.coupling.entries()) {
        const auto z = a.point(e.row);
        const auto x = mu.point(e.col);
        for (std::size_t k = 0; k < d; ++k) coords.push_back(z[k] + x[k] - u[e.row * d + k]);
        weights.push_back(e.mass);
    }
    return normalize(DiscreteMeasure(d, std::move(coords), std::move(weights)));
}

struct WeakDualityReport {
    double value = 0.0;    // V(alpha)
    double primal = 0.0;   // primal estimate supplied by the caller
    double margin = 0.0;   // value - primal
    bool violated = false;
};

/// V(alpha) >= P: reports the margin and flags violations beyond `tolerance`.
[[nodiscard]] inline WeakDualityReport weak_duality_check(const DiscreteMeasure& alpha, const DiscreteMeasure& mu,
                                                          const DiscreteMeasure& nu, double primal_estimate,
                                                          double tolerance = 1e-9, const BassConfig& cfg = {}) {
    WeakDualityReport r;
    r.value = evaluate_V(normalize(alpha), mu, nu, cfg).value;
    r.primal = primal_estimate;
    r.margin = r.value - primal_estimate;
    r.violated = r.margin < -tolerance;
    return r;
}

}  // namespace bassmbb

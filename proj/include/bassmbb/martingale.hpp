#pragma once

// The Bass martingale M_t = grad v_t(B_t), v_t = v * gamma^{1-t}, built from a
// solved Bass measure: path simulation, marginal fidelity, the static coupling
// value, the covariation estimate of E int tr(sigma_t) dt and the MCov rate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bassmbb/bass_core.hpp"
#include "bassmbb/errors.hpp"
#include "bassmbb/measures.hpp"
#include "bassmbb/ot_core.hpp"
#include "bassmbb/parallel.hpp"

namespace bassmbb {

struct BassMartingaleModel {
    DiscreteMeasure alpha_hat;
    MapSamples v_map;
    MapSamples phi_map;
    QuadratureRule rule;
    std::uint64_t rng_seed = 0;

    [[nodiscard]] std::size_t dim() const noexcept { return alpha_hat.dim(); }

    /// `rule` drives the heat-kernel average in map_vt; the default is
    /// simulation_rule(d).
    [[nodiscard]] static BassMartingaleModel from_solution(const BassSolution& sol, std::uint64_t seed = 0,
                                                           std::optional<QuadratureRule> rule = std::nullopt);
};

/// Quadrature used to smooth the sampled map in time: 128 quantile nodes in d = 1,
/// 16 per axis in d = 2, and the solver's Gauss-Hermite default beyond.
[[nodiscard]] inline QuadratureRule simulation_rule(std::size_t dim) {
    if (dim == 1) return quantile_rule(1, 128);
    if (dim == 2) return quantile_rule(2, 16);
    return gauss_hermite(dim, default_quadrature_nodes(dim));
}

inline BassMartingaleModel BassMartingaleModel::from_solution(const BassSolution& sol, std::uint64_t seed,
                                                              std::optional<QuadratureRule> rule) {
    return {sol.alpha_hat, sol.v_map, sol.phi_map, rule ? std::move(*rule) : simulation_rule(sol.alpha_hat.dim()), seed};
}

/// grad v_t(x): the sampled map averaged over x + sqrt(1 - t) * node. At t = 1 the
/// map is evaluated directly.
[[nodiscard]] inline Vec map_vt(const BassMartingaleModel& model, std::span<const double> x, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw Error(Errc::InvalidArgument, "time outside [0, 1]");
    const std::size_t d = model.dim();
    if (x.size() != d) throw Error(Errc::DimensionMismatch, "query dimension");
    if (t == 1.0) return map_evaluate(model.v_map, x);
    const double s = std::sqrt(1.0 - t);
    Vec out(d, 0.0), q(d);
    for (std::size_t j = 0; j < model.rule.size(); ++j) {
        const auto node = model.rule.node(j);
        for (std::size_t k = 0; k < d; ++k) q[k] = x[k] + s * node[k];
        const Vec v = map_evaluate(model.v_map, q);
        for (std::size_t k = 0; k < d; ++k) out[k] += model.rule.weights[j] * v[k];
    }
    return out;
}

/// Paths of (M, B) on a time grid; arrays are path-major, then time, then coordinate.
struct PathEnsemble {
    Vec times;
    std::size_t n_paths = 0;
    std::size_t dim = 1;
    Vec m;
    Vec b;
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t n_times() const noexcept { return times.size(); }
    [[nodiscard]] std::size_t offset(std::size_t path, std::size_t ti) const noexcept {
        return (path * times.size() + ti) * dim;
    }
    [[nodiscard]] std::span<const double> M(std::size_t path, std::size_t ti) const noexcept {
        return {m.data() + offset(path, ti), dim};
    }
    [[nodiscard]] std::span<const double> B(std::size_t path, std::size_t ti) const noexcept {
        return {b.data() + offset(path, ti), dim};
    }
    /// Law of M at grid time index ti, uniform over paths.
    [[nodiscard]] DiscreteMeasure law_M(std::size_t ti, std::size_t max_paths = 0) const {
        const std::size_t n = max_paths ? std::min(max_paths, n_paths) : n_paths;
        Vec c;
        c.reserve(n * dim);
        for (std::size_t p = 0; p < n; ++p) {
            const auto v = M(p, ti);
            c.insert(c.end(), v.begin(), v.end());
        }
        return DiscreteMeasure::uniform(dim, std::move(c));
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent generator for stream `index` of `seed`.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL)));
}

inline std::size_t sample_index(const Vec& cdf, double u) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

inline Vec cumulative(const DiscreteMeasure& m) {
    Vec cdf(m.size());
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) cdf[i] = (s += m.weight(i));
    for (double& v : cdf) v /= s;
    return cdf;
}

}  // namespace detail

/// Uniform grid 0 = t_0 < ... < t_n = 1; B_0 ~ alpha-hat, Gaussian increments, and
/// M_t = grad v_t(B_t). Path p uses its own generator stream, so output does not
/// depend on the worker count.
[[nodiscard]] inline PathEnsemble simulate_paths(const BassMartingaleModel& model, std::size_t n_paths,
                                                 std::size_t n_steps, std::uint64_t seed) {
    if (n_paths == 0 || n_steps == 0) throw Error(Errc::InvalidArgument, "need at least one path and one step");
    const std::size_t d = model.dim();
    PathEnsemble e;
    e.n_paths = n_paths;
    e.dim = d;
    e.seed = seed;
    e.times.resize(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) e.times[k] = static_cast<double>(k) / static_cast<double>(n_steps);
    e.times.back() = 1.0;
    e.m.assign(n_paths * (n_steps + 1) * d, 0.0);
    e.b.assign(e.m.size(), 0.0);
    const Vec cdf = detail::cumulative(model.alpha_hat);

    parallel_for(n_paths, [&](std::size_t p) {
        auto gen = detail::stream(seed, p);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        const auto z = model.alpha_hat.point(detail::sample_index(cdf, unif(gen)));
        double* b = e.b.data() + e.offset(p, 0);
        std::copy(z.begin(), z.end(), b);
        for (std::size_t k = 1; k <= n_steps; ++k) {
            const double sd = std::sqrt(e.times[k] - e.times[k - 1]);
            const double* prev = e.b.data() + e.offset(p, k - 1);
            double* cur = e.b.data() + e.offset(p, k);
            for (std::size_t c = 0; c < d; ++c) cur[c] = prev[c] + sd * normal(gen);
        }
        for (std::size_t k = 0; k <= n_steps; ++k) {
            const Vec mv = map_vt(model, e.B(p, k), e.times[k]);
            std::copy(mv.begin(), mv.end(), e.m.data() + e.offset(p, k));
        }
    }, 64);
    return e;
}

/// W2 between an empirical cloud and a reference measure.
[[nodiscard]] inline double w2_distance(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    return std::sqrt(std::max(0.0, w2_squared(a, b)));
}

struct MarginalErrors {
    double e0 = 0.0;  // W2(Law M_0, mu)
    double e1 = 0.0;  // W2(Law M_1, nu)
};

/// W2 distances of the simulated endpoint laws to mu and nu. Beyond d = 1 the
/// clouds are subsampled to `max_points` paths to keep the exact solve small.
[[nodiscard]] inline MarginalErrors marginal_error(const PathEnsemble& e, const DiscreteMeasure& mu,
                                                   const DiscreteMeasure& nu, std::size_t max_points = 400) {
    const std::size_t cap = e.dim == 1 ? 0 : max_points;
    return {w2_distance(e.law_M(0, cap), normalize(mu)), w2_distance(e.law_M(e.n_times() - 1, cap), normalize(nu))};
}

/// Statistical floor for marginal_error: mean W2 between `n_samples` iid draws from
/// `m` and `m` itself, over `reps` independent draws.
[[nodiscard]] inline double resampling_floor(const DiscreteMeasure& m_in, std::size_t n_samples, std::uint64_t seed,
                                             std::size_t reps = 5, std::size_t max_points = 400) {
    const DiscreteMeasure m = normalize(m_in);
    const std::size_t n = m.dim() == 1 ? n_samples : std::min(n_samples, max_points);
    const Vec cdf = detail::cumulative(m);
    double total = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        auto gen = detail::stream(seed, r);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Vec c;
        c.reserve(n * m.dim());
        for (std::size_t s = 0; s < n; ++s) {
            const auto p = m.point(detail::sample_index(cdf, unif(gen)));
            c.insert(c.end(), p.begin(), p.end());
        }
        total += w2_distance(DiscreteMeasure::uniform(m.dim(), std::move(c)), m);
    }
    return total / static_cast<double>(reps);
}

struct StaticCouplingReport {
    std::vector<DiscreteMeasure> kernels;  // pi-hat_x per atom x of mu
    Vec kernel_values;                     // MCov(pi-hat_x, gamma)
    Vec barycenter_violation;              // |bary(pi-hat_x) - x|
    double value = 0.0;                    // P-tilde
    double max_violation = 0.0;
};

/// pi-hat_x = image of gamma centred at grad phi(x) under grad v, for every atom x
/// of mu, and P-tilde = sum_x w_x MCov(pi-hat_x, gamma).
[[nodiscard]] inline StaticCouplingReport static_value(const BassMartingaleModel& model, const DiscreteMeasure& mu_in,
                                                       const QuadratureRule& rule, const OtOptions& ot = {}) {
    const DiscreteMeasure mu = normalize(mu_in);
    const std::size_t d = mu.dim();
    if (rule.dim != d || model.dim() != d) throw Error(Errc::DimensionMismatch, "quadrature dimension differs from mu");
    const DiscreteMeasure gamma(d, rule.nodes, rule.weights);
    StaticCouplingReport rep;
    rep.kernels.resize(mu.size());
    rep.kernel_values.assign(mu.size(), 0.0);
    rep.barycenter_violation.assign(mu.size(), 0.0);
    parallel_for(mu.size(), [&](std::size_t i) {
        const Vec c = map_evaluate(model.phi_map, mu.point(i));
        Vec atoms(rule.size() * d), q(d);
        for (std::size_t j = 0; j < rule.size(); ++j) {
            const auto node = rule.node(j);
            for (std::size_t k = 0; k < d; ++k) q[k] = c[k] + node[k];
            const Vec v = map_evaluate(model.v_map, q);
            std::copy(v.begin(), v.end(), atoms.begin() + static_cast<std::ptrdiff_t>(j * d));
        }
        DiscreteMeasure kernel(d, std::move(atoms), rule.weights);
        rep.kernel_values[i] = mcov(kernel, gamma, ot).value;
        const Vec bk = barycenter(kernel);
        double viol = 0.0;
        for (std::size_t k = 0; k < d; ++k) viol += (bk[k] - mu.point(i)[k]) * (bk[k] - mu.point(i)[k]);
        rep.barycenter_violation[i] = std::sqrt(viol);
        rep.kernels[i] = std::move(kernel);
    }, 8);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        rep.value += mu.weight(i) * rep.kernel_values[i];
        rep.max_violation = std::max(rep.max_violation, rep.barycenter_violation[i]);
    }
    return rep;
}

struct MonteCarloEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

/// E int_{t_i}^{t_j} tr(sigma_s) ds estimated by E[<M_{t_j}, B_{t_j}> - <M_{t_i}, B_{t_i}>].
[[nodiscard]] inline MonteCarloEstimate trace_sigma_between(const PathEnsemble& e, std::size_t ti, std::size_t tj) {
    if (ti >= e.n_times() || tj >= e.n_times() || ti > tj) throw Error(Errc::InvalidArgument, "time indices");
    double s = 0.0, s2 = 0.0;
    for (std::size_t p = 0; p < e.n_paths; ++p) {
        const double v = dot(e.M(p, tj), e.B(p, tj)) - dot(e.M(p, ti), e.B(p, ti));
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(e.n_paths);
    MonteCarloEstimate est;
    est.mean = s / n;
    const double var = e.n_paths > 1 ? std::max(0.0, (s2 - n * est.mean * est.mean) / (n - 1.0)) : 0.0;
    est.standard_error = std::sqrt(var / n);
    return est;
}

[[nodiscard]] inline MonteCarloEstimate expected_trace_sigma_estimate(const PathEnsemble& e) {
    return trace_sigma_between(e, 0, e.n_times() - 1);
}

[[nodiscard]] inline double expected_trace_sigma(const PathEnsemble& e) { return expected_trace_sigma_estimate(e).mean; }

/// A marginal flow: (t, mu_t) pairs.
using MarginalFlow = std::vector<std::pair<double, DiscreteMeasure>>;

namespace detail {

inline const DiscreteMeasure& flow_at(const MarginalFlow& flow, double t) {
    for (const auto& [s, m] : flow)
        if (std::abs(s - t) <= 1e-12) return m;
    throw Error(Errc::MissingMarginal, "flow has no marginal at t = " + std::to_string(t));
}

}  // namespace detail

/// (MCov(alpha * gamma^h, mu_{t+h}) - MCov(alpha, mu_t)) / h with exact OT.
[[nodiscard]] inline double mcov_rate(const DiscreteMeasure& alpha, const MarginalFlow& flow, double t, double h,
                                      const QuadratureRule& rule) {
    if (!(h > 0.0)) throw Error(Errc::InvalidArgument, "step must be positive");
    const DiscreteMeasure& now = detail::flow_at(flow, t);
    const DiscreteMeasure& next = detail::flow_at(flow, t + h);
    const DiscreteMeasure a = normalize(alpha);
    return (mcov(gaussian_smooth(a, h, rule), normalize(next)).value - mcov(a, normalize(now)).value) / h;
}

[[nodiscard]] inline double mcov_rate(const DiscreteMeasure& alpha, const MarginalFlow& flow, double t, double h) {
    return mcov_rate(alpha, flow, t, h, gauss_hermite(alpha.dim(), default_quadrature_nodes(alpha.dim())));
}

struct IncrementBin {
    std::size_t count = 0;
    double mean = 0.0;
    double standard_error = 0.0;
    double z = 0.0;  // |mean| / standard_error
};

struct IncrementCheck {
    std::size_t from = 0;
    std::size_t to = 0;
    std::vector<IncrementBin> bins;
    double max_z = 0.0;
};

/// Means of M_s - M_t within quantile bins of the first coordinate of M_t.
[[nodiscard]] inline IncrementCheck martingale_increment_check(const PathEnsemble& e, std::size_t ti, std::size_t tj,
                                                              std::size_t n_bins = 10) {
    if (ti >= tj || tj >= e.n_times()) throw Error(Errc::InvalidArgument, "need t_i < t_j on the grid");
    if (n_bins == 0) throw Error(Errc::InvalidArgument, "need at least one bin");
    std::vector<std::size_t> order(e.n_paths);
    for (std::size_t p = 0; p < e.n_paths; ++p) order[p] = p;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return e.M(a, ti)[0] < e.M(b, ti)[0]; });
    IncrementCheck out{ti, tj, {}, 0.0};
    for (std::size_t k = 0; k < n_bins; ++k) {
        const std::size_t lo = k * e.n_paths / n_bins, hi = (k + 1) * e.n_paths / n_bins;
        IncrementBin bin;
        bin.count = hi - lo;
        if (bin.count == 0) continue;
        // In d > 1 the worst coordinate is reported.
        double worst_z = 0.0;
        for (std::size_t c = 0; c < e.dim; ++c) {
            double s = 0.0, s2 = 0.0;
            for (std::size_t r = lo; r < hi; ++r) {
                const double v = e.M(order[r], tj)[c] - e.M(order[r], ti)[c];
                s += v;
                s2 += v * v;
            }
            const double n = static_cast<double>(bin.count);
            const double mean = s / n;
            const double var = bin.count > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)) : 0.0;
            const double se = std::sqrt(var / n);
            const double z = se > 0.0 ? std::abs(mean) / se : (std::abs(mean) > 1e-12 ? HUGE_VAL : 0.0);
            if (c == 0 || z > worst_z) {
                worst_z = z;
                bin.mean = mean;
                bin.standard_error = se;
            }
        }
        bin.z = worst_z;
        out.max_z = std::max(out.max_z, bin.z);
        out.bins.push_back(bin);
    }
    return out;
}

}  // namespace bassmbb

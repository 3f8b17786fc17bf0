#pragma once

// Maximal covariance MCov(p, q) = sup over couplings of E<X, Y>, quadratic
// Wasserstein distance, barycentric (Brenier-surrogate) maps and their
// off-sample evaluation.
//
// All solvers maximize <x, y> directly. Dual potentials use the concave-dual
// convention f_i + g_j >= <x_i, y_j>, with equality on the optimal support, and
// are normalized so that f at the first source atom is zero.

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
#include "bassmbb/parallel.hpp"
#include "bassmbb/transport_simplex.hpp"

namespace bassmbb {

struct CouplingEntry {
    std::size_t row = 0;
    std::size_t col = 0;
    double mass = 0.0;
};

/// Sparse coupling, entries sorted by (row, col) with a row index for fast row access.
class Coupling {
public:
    Coupling() = default;
    Coupling(std::size_t rows, std::size_t cols, std::vector<CouplingEntry> entries)
        : rows_(rows), cols_(cols), entries_(std::move(entries)) {
        std::sort(entries_.begin(), entries_.end(), [](const CouplingEntry& a, const CouplingEntry& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        row_start_.assign(rows_ + 1, 0);
        for (const auto& e : entries_) ++row_start_[e.row + 1];
        std::partial_sum(row_start_.begin(), row_start_.end(), row_start_.begin());
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] const std::vector<CouplingEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] std::span<const CouplingEntry> row(std::size_t i) const noexcept {
        return {entries_.data() + row_start_[i], row_start_[i + 1] - row_start_[i]};
    }

    [[nodiscard]] Vec row_sums() const {
        Vec s(rows_, 0.0);
        for (const auto& e : entries_) s[e.row] += e.mass;
        return s;
    }
    [[nodiscard]] Vec col_sums() const {
        Vec s(cols_, 0.0);
        for (const auto& e : entries_) s[e.col] += e.mass;
        return s;
    }

    /// The same plan read with source and target exchanged.
    [[nodiscard]] Coupling transposed() const {
        std::vector<CouplingEntry> t;
        t.reserve(entries_.size());
        for (const auto& e : entries_) t.push_back({e.col, e.row, e.mass});
        return Coupling(cols_, rows_, std::move(t));
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<CouplingEntry> entries_;
    std::vector<std::size_t> row_start_{0};
};

struct DualPotentials {
    Vec f;  // per source atom, f[0] == 0
    Vec g;  // per target atom
};

enum class OtMethodTag { Exact1d, Lp, Entropic };

[[nodiscard]] inline const char* to_string(OtMethodTag t) noexcept {
    switch (t) {
        case OtMethodTag::Exact1d: return "exact1d";
        case OtMethodTag::Lp: return "lp";
        case OtMethodTag::Entropic: return "entropic";
    }
    return "unknown";
}

/// Solver diagnostics.
struct SolverStats {
    std::size_t iterations = 0;
    double marginal_violation = 0.0;
    double duality_gap = 0.0;
};

struct TransportResult {
    double value = 0.0;  // MCov
    Coupling coupling;
    DualPotentials potentials;
    OtMethodTag method = OtMethodTag::Exact1d;
    std::optional<double> epsilon;
    SolverStats stats;
};

[[nodiscard]] inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

namespace detail {

inline void normalize_potentials(DualPotentials& pot) {
    if (pot.f.empty()) return;
    const double shift = pot.f[0];
    for (double& v : pot.f) v -= shift;
    for (double& v : pot.g) v += shift;
}

inline double duality_value(const DualPotentials& pot, const DiscreteMeasure& p, const DiscreteMeasure& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += pot.f[i] * p.weight(i);
    for (std::size_t j = 0; j < q.size(); ++j) s += pot.g[j] * q.weight(j);
    return s;
}

inline std::vector<std::size_t> sorted_order_1d(const DiscreteMeasure& m) {
    std::vector<std::size_t> order(m.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return m.point(a)[0] < m.point(b)[0]; });
    return order;
}

inline void check_pair(const DiscreteMeasure& p, const DiscreteMeasure& q) {
    require_same_dim(p, q);
    require_probability(p, "source");
    require_probability(q, "target");
}

}  // namespace detail

/// Comonotone (quantile) coupling in d = 1, built by merging sorted cumulative
/// weights. Tied cumulative boundaries are resolved with left-closed intervals.
[[nodiscard]] inline TransportResult mcov_exact_1d(const DiscreteMeasure& p, const DiscreteMeasure& q) {
    if (p.dim() != 1 || q.dim() != 1) throw Error(Errc::DimensionNotOne, "exact quantile coupling needs d = 1");
    detail::check_pair(p, q);
    const auto po = detail::sorted_order_1d(p);
    const auto qo = detail::sorted_order_1d(q);
    const double scale = p.total_mass() / q.total_mass();

    std::vector<CouplingEntry> entries;
    entries.reserve(p.size() + q.size());
    Vec f(p.size(), 0.0), g(q.size(), 0.0);
    std::vector<char> f_set(p.size(), 0), g_set(q.size(), 0);
    auto x = [&](std::size_t i) { return p.point(i)[0]; };
    auto y = [&](std::size_t j) { return q.point(j)[0]; };

    // Walk the staircase; every visited cell (including zero-mass links where
    // both cumulative sums close together) fixes one potential.
    std::size_t a = 0, b = 0;
    double ra = p.weight(po[0]);
    double rb = q.weight(qo[0]) * scale;
    f[po[0]] = 0.0;
    f_set[po[0]] = 1;
    g[qo[0]] = x(po[0]) * y(qo[0]);
    g_set[qo[0]] = 1;
    double value = 0.0;
    for (;;) {
        const std::size_t i = po[a], j = qo[b];
        // The last column (row) absorbs whatever rounding left over, so no
        // tiny-weight atom at the far end is starved.
        double t = std::max(0.0, std::min(ra, rb));
        if (a == p.size() - 1 && b == q.size() - 1) t = std::max({0.0, ra, rb});
        else if (b == q.size() - 1) t = std::max(0.0, ra);
        else if (a == p.size() - 1) t = std::max(0.0, rb);
        if (t > 0.0) {
            entries.push_back({i, j, t});
            value += t * x(i) * y(j);
        }
        ra -= t;
        rb -= t;
        if (a == p.size() - 1 && b == q.size() - 1) break;
        if ((ra <= rb && a < p.size() - 1) || b == q.size() - 1) {
            ++a;
            ra = p.weight(po[a]);
            const std::size_t ni = po[a];
            f[ni] = x(ni) * y(j) - g[j];
            f_set[ni] = 1;
        } else {
            ++b;
            rb = q.weight(qo[b]) * scale;
            const std::size_t nj = qo[b];
            g[nj] = x(i) * y(nj) - f[i];
            g_set[nj] = 1;
        }
    }

    TransportResult r;
    r.value = value;
    r.coupling = Coupling(p.size(), q.size(), std::move(entries));
    r.potentials = {std::move(f), std::move(g)};
    detail::normalize_potentials(r.potentials);
    r.method = OtMethodTag::Exact1d;
    r.stats.iterations = p.size() + q.size() - 1;
    r.stats.duality_gap = detail::duality_value(r.potentials, p, q) - value;
    return r;
}

struct LpOptions {
    std::size_t size_cap = 1'000'000;
};

/// Exact MCov by the network simplex on the dense bipartite graph.
[[nodiscard]] inline TransportResult mcov_lp(const DiscreteMeasure& p, const DiscreteMeasure& q,
                                             const LpOptions& opts = {}) {
    detail::check_pair(p, q);
    const std::size_t n = p.size(), m = q.size();
    if (n * m > opts.size_cap)
        throw Error(Errc::SizeCapExceeded,
                    "n*m = " + std::to_string(n * m) + " exceeds cap " + std::to_string(opts.size_cap));
    Vec cost(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = dot(p.point(i), q.point(j));

    // Start from the north-west corner along a common projection direction.
    const std::size_t d = p.dim();
    Vec dir(d, 1.0);
    auto proj_order = [&](const DiscreteMeasure& mm) {
        std::vector<std::size_t> order(mm.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Vec key(mm.size());
        for (std::size_t i = 0; i < mm.size(); ++i) key[i] = dot(mm.point(i), dir);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
        return order;
    };
    const auto ro = proj_order(p);
    const auto co = proj_order(q);

    const auto sol = simplex::solve_transport_max(cost, p.weights(), q.weights(), ro, co);
    std::vector<CouplingEntry> entries;
    entries.reserve(sol.basis.size());
    for (const auto& c : sol.basis)
        if (c.flow > 0.0) entries.push_back({c.row, c.col, c.flow});

    TransportResult r;
    r.value = sol.value;
    r.coupling = Coupling(n, m, std::move(entries));
    r.potentials = {sol.row_potential, sol.col_potential};
    detail::normalize_potentials(r.potentials);
    r.method = OtMethodTag::Lp;
    r.stats.iterations = sol.pivots;
    r.stats.duality_gap = detail::duality_value(r.potentials, p, q) - r.value;
    return r;
}

struct EntropicOptions {
    double epsilon = 0.01;
    std::size_t max_iter = 20000;
    double tol = 1e-6;  // L1 marginal violation at the final scale, before rounding
    std::size_t size_cap = 1'000'000;
};

namespace detail {

inline double log_sum_exp(const double* v, std::size_t n) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, v[k]);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += std::exp(v[k] - mx);
    return mx + std::log(s);
}

}  // namespace detail

/// Log-domain Sinkhorn on the score <x, y> with epsilon scaling (start at 0.2 x
/// score range, halve down to the target). The returned plan is rounded onto the
/// exact marginals before the value is computed, so value <= exact MCov.
[[nodiscard]] inline TransportResult mcov_entropic(const DiscreteMeasure& p, const DiscreteMeasure& q,
                                                   const EntropicOptions& opts = {}) {
    detail::check_pair(p, q);
    if (!(opts.epsilon > 0.0)) throw Error(Errc::InvalidArgument, "epsilon must be positive");
    const std::size_t n = p.size(), m = q.size();
    if (n * m > opts.size_cap) throw Error(Errc::SizeCapExceeded, "entropic problem exceeds size cap");

    Vec score(n * m);
    double smin = std::numeric_limits<double>::infinity(), smax = -smin;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double s = dot(p.point(i), q.point(j));
            score[i * m + j] = s;
            smin = std::min(smin, s);
            smax = std::max(smax, s);
        }
    const double range = smax - smin > 0.0 ? smax - smin : 1.0;

    Vec loga(n), logb(m);
    for (std::size_t i = 0; i < n; ++i) loga[i] = std::log(p.weight(i));
    for (std::size_t j = 0; j < m; ++j) logb[j] = std::log(q.weight(j) / q.total_mass() * p.total_mass());

    Vec F(n, 0.0), G(m, 0.0);
    // Plan: pi_ij = a_i b_j exp((s_ij - F_i - G_j) / eps).
    auto update_rows = [&](double eps) {
        parallel_for(n, [&](std::size_t i) {
            thread_local Vec buf;
            buf.resize(m);
            for (std::size_t j = 0; j < m; ++j) buf[j] = logb[j] + (score[i * m + j] - G[j]) / eps;
            F[i] = eps * detail::log_sum_exp(buf.data(), m);
        });
    };
    auto update_cols = [&](double eps) {
        parallel_for(m, [&](std::size_t j) {
            thread_local Vec buf;
            buf.resize(n);
            for (std::size_t i = 0; i < n; ++i) buf[i] = loga[i] + (score[i * m + j] - F[i]) / eps;
            G[j] = eps * detail::log_sum_exp(buf.data(), n);
        });
    };
    auto row_violation = [&](double eps) {
        double viol = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j)
                s += std::exp(loga[i] + logb[j] + (score[i * m + j] - F[i] - G[j]) / eps);
            viol += std::abs(s - p.weight(i));
        }
        return viol;
    };

    std::vector<double> schedule;
    for (double e = 0.2 * range; e > opts.epsilon; e *= 0.5) schedule.push_back(e);
    schedule.push_back(opts.epsilon);

    std::size_t iters = 0;
    double viol = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < schedule.size(); ++s) {
        const double eps = schedule[s];
        const bool last = s + 1 == schedule.size();
        const double stage_tol = last ? opts.tol : std::max(opts.tol, 1e-4);
        for (;;) {
            update_rows(eps);
            update_cols(eps);
            ++iters;
            if (iters % 10 == 0 || last) {
                viol = row_violation(eps);
                if (viol < stage_tol) break;
            }
            if (iters >= opts.max_iter)
                throw Error(Errc::NoConvergence, "Sinkhorn did not reach tolerance in " +
                                                     std::to_string(opts.max_iter) + " iterations");
        }
    }

    // Round onto the exact marginals.
    const double eps = schedule.back();
    Vec plan(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            plan[i * m + j] = std::exp(loga[i] + logb[j] + (score[i * m + j] - F[i] - G[j]) / eps);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += plan[i * m + j];
        const double x = s > 0.0 ? std::min(1.0, p.weight(i) / s) : 1.0;
        for (std::size_t j = 0; j < m; ++j) plan[i * m + j] *= x;
    }
    Vec target_b(m);
    for (std::size_t j = 0; j < m; ++j) target_b[j] = std::exp(logb[j]);
    for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += plan[i * m + j];
        const double y = s > 0.0 ? std::min(1.0, target_b[j] / s) : 1.0;
        for (std::size_t i = 0; i < n; ++i) plan[i * m + j] *= y;
    }
    Vec err_a(n), err_b(m);
    double err_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += plan[i * m + j];
        err_a[i] = std::max(0.0, p.weight(i) - s);
        err_norm += err_a[i];
    }
    for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += plan[i * m + j];
        err_b[j] = std::max(0.0, target_b[j] - s);
    }
    if (err_norm > 0.0)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) plan[i * m + j] += err_a[i] * err_b[j] / err_norm;

    std::vector<CouplingEntry> entries;
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (plan[i * m + j] > 0.0) {
                entries.push_back({i, j, plan[i * m + j]});
                value += plan[i * m + j] * score[i * m + j];
            }

    TransportResult r;
    r.value = value;
    r.coupling = Coupling(n, m, std::move(entries));
    r.potentials = {F, G};
    detail::normalize_potentials(r.potentials);
    r.method = OtMethodTag::Entropic;
    r.epsilon = opts.epsilon;
    r.stats.iterations = iters;
    r.stats.marginal_violation = viol;
    r.stats.duality_gap = detail::duality_value(r.potentials, p, q) - value;
    return r;
}

enum class OtMethod { Exact, Entropic };

struct OtOptions {
    OtMethod method = OtMethod::Exact;
    LpOptions lp{};
    EntropicOptions entropic{};
};

/// Dispatch: exact means the quantile coupling in d = 1 and the network simplex otherwise.
[[nodiscard]] inline TransportResult mcov(const DiscreteMeasure& p, const DiscreteMeasure& q,
                                          const OtOptions& opts = {}) {
    if (opts.method == OtMethod::Entropic) return mcov_entropic(p, q, opts.entropic);
    if (p.dim() == 1 && q.dim() == 1) return mcov_exact_1d(p, q);
    return mcov_lp(p, q, opts.lp);
}

/// W2^2 = m2(p) + m2(q) - 2 MCov(p, q). Values in [-1e-9, 0) are clamped to 0
/// with a warning on stderr; anything more negative is reported as is.
[[nodiscard]] inline double w2_squared(const DiscreteMeasure& p, const DiscreteMeasure& q,
                                       const OtOptions& opts = {}) {
    const TransportResult r = mcov(p, q, opts);
    double v = 0.0;
    for (std::size_t i = 0; i < r.coupling.rows(); ++i) {
        const auto x = p.point(i);
        for (const auto& e : r.coupling.row(i)) {
            const auto y = q.point(e.col);
            double d2 = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) d2 += (x[k] - y[k]) * (x[k] - y[k]);
            v += e.mass * d2;
        }
    }
    if (v < 0.0 && v >= -1e-9) {
        if (v < -1e-12) std::fprintf(stderr, "bassmbb: clamping W2^2 = %.3e to 0\n", v);
        return 0.0;
    }
    return v;
}

/// Barycentric projection T(x_i) = sum_j pi_ij y_j / sum_j pi_ij.
[[nodiscard]] inline Vec brenier_map(const TransportResult& result, const DiscreteMeasure& target, std::size_t at) {
    if (at >= result.coupling.rows()) throw Error(Errc::InvalidArgument, "source index out of range");
    Vec out(target.dim(), 0.0);
    double mass = 0.0;
    for (const auto& e : result.coupling.row(at)) {
        const auto y = target.point(e.col);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += e.mass * y[k];
        mass += e.mass;
    }
    if (!(mass > 0.0)) throw Error(Errc::EmptyRow, "source atom carries no mass");
    for (double& v : out) v /= mass;
    return out;
}

/// Barycentric projection at every source atom, row-major (n x d).
[[nodiscard]] inline Vec brenier_map_all(const TransportResult& result, const DiscreteMeasure& target) {
    const std::size_t d = target.dim();
    Vec out(result.coupling.rows() * d, 0.0);
    for (std::size_t i = 0; i < result.coupling.rows(); ++i) {
        double mass = 0.0;
        for (const auto& e : result.coupling.row(i)) {
            const auto y = target.point(e.col);
            for (std::size_t k = 0; k < d; ++k) out[i * d + k] += e.mass * y[k];
            mass += e.mass;
        }
        if (!(mass > 0.0)) throw Error(Errc::EmptyRow, "source atom carries no mass");
        for (std::size_t k = 0; k < d; ++k) out[i * d + k] /= mass;
    }
    return out;
}

/// Exact MCov by enumerating all permutations (equal weights, n = m <= 8).
[[nodiscard]] inline double brute_force_mcov(const DiscreteMeasure& p, const DiscreteMeasure& q) {
    require_same_dim(p, q);
    const std::size_t n = p.size();
    if (n != q.size()) throw Error(Errc::InvalidArgument, "brute force needs n = m");
    if (n > 8 || n == 0) throw Error(Errc::SizeCapExceeded, "brute force limited to 1 <= n <= 8");
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(p.weight(i) - p.weight(0)) > 1e-12 || std::abs(q.weight(i) - p.weight(0)) > 1e-12)
            throw Error(Errc::InvalidArgument, "brute force needs equal weights");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = -std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += dot(p.point(i), q.point(perm[i]));
        best = std::max(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Sampled maps

enum class MapMode { Auto, Linear1d, InverseDistance };

/// Samples (point, value) of a vector field R^d -> R^d. In d = 1 the samples are
/// kept sorted with coincident points merged (values averaged).
class MapSamples {
public:
    MapSamples() = default;
    MapSamples(std::size_t dim, Vec points, Vec values) : dim_(dim), points_(std::move(points)), values_(std::move(values)) {
        if (dim_ == 0 || points_.empty()) throw Error(Errc::InvalidArgument, "map samples must be nonempty");
        if (points_.size() % dim_ != 0 || values_.size() != points_.size())
            throw Error(Errc::DimensionMismatch, "map sample shapes");
        if (dim_ == 1) build_line();
    }

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t size() const noexcept { return points_.size() / dim_; }
    [[nodiscard]] const Vec& points() const noexcept { return points_; }
    [[nodiscard]] const Vec& values() const noexcept { return values_; }
    [[nodiscard]] std::span<const double> point(std::size_t i) const noexcept { return {points_.data() + i * dim_, dim_}; }
    [[nodiscard]] std::span<const double> value(std::size_t i) const noexcept { return {values_.data() + i * dim_, dim_}; }

    /// Sorted, merged 1-D knots.
    [[nodiscard]] const Vec& knots() const noexcept { return knot_x_; }
    [[nodiscard]] const Vec& knot_values() const noexcept { return knot_y_; }

    [[nodiscard]] double eval_1d(double x) const noexcept {
        if (x <= knot_x_.front()) return knot_y_.front();
        if (x >= knot_x_.back()) return knot_y_.back();
        const auto it = std::upper_bound(knot_x_.begin(), knot_x_.end(), x);
        const std::size_t hi = static_cast<std::size_t>(it - knot_x_.begin());
        const std::size_t lo = hi - 1;
        const double t = (x - knot_x_[lo]) / (knot_x_[hi] - knot_x_[lo]);
        return knot_y_[lo] + t * (knot_y_[hi] - knot_y_[lo]);
    }

    void eval_idw(std::span<const double> x, std::span<double> out, std::size_t k = 4) const {
        const std::size_t n = size();
        k = std::min(k, n);
        // Keep the k nearest by a bounded insertion list.
        std::vector<std::pair<double, std::size_t>> best;
        best.reserve(k + 1);
        for (std::size_t i = 0; i < n; ++i) {
            double d2 = 0.0;
            const auto p = point(i);
            for (std::size_t c = 0; c < dim_; ++c) d2 += (p[c] - x[c]) * (p[c] - x[c]);
            if (best.size() == k && d2 >= best.back().first) continue;
            const auto pos = std::upper_bound(best.begin(), best.end(), std::make_pair(d2, i));
            best.insert(pos, {d2, i});
            if (best.size() > k) best.pop_back();
        }
        std::fill(out.begin(), out.end(), 0.0);
        if (best.front().first == 0.0) {
            const auto v = value(best.front().second);
            std::copy(v.begin(), v.end(), out.begin());
            return;
        }
        double wsum = 0.0;
        for (const auto& [d2, i] : best) {
            const double w = 1.0 / std::sqrt(d2);
            const auto v = value(i);
            for (std::size_t c = 0; c < dim_; ++c) out[c] += w * v[c];
            wsum += w;
        }
        for (double& v : out) v /= wsum;
    }

private:
    void build_line() {
        std::vector<std::size_t> order(size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points_[a] < points_[b]; });
        knot_x_.clear();
        knot_y_.clear();
        std::size_t count = 0;
        for (std::size_t idx : order) {
            if (!knot_x_.empty() && points_[idx] == knot_x_.back()) {
                ++count;
                knot_y_.back() += (values_[idx] - knot_y_.back()) / static_cast<double>(count);
                continue;
            }
            knot_x_.push_back(points_[idx]);
            knot_y_.push_back(values_[idx]);
            count = 1;
        }
    }

    std::size_t dim_ = 1;
    Vec points_;
    Vec values_;
    Vec knot_x_;
    Vec knot_y_;
};

/// Off-sample evaluation: d = 1 piecewise-linear interpolation with constant
/// extrapolation; otherwise inverse-distance weighting over the 4 nearest samples.
[[nodiscard]] inline Vec map_evaluate(const MapSamples& samples, std::span<const double> x,
                                      MapMode mode = MapMode::Auto) {
    if (x.size() != samples.dim()) throw Error(Errc::DimensionMismatch, "query dimension");
    if (mode == MapMode::Auto) mode = samples.dim() == 1 ? MapMode::Linear1d : MapMode::InverseDistance;
    if (mode == MapMode::Linear1d) {
        if (samples.dim() != 1) throw Error(Errc::DimensionNotOne, "linear interpolation needs d = 1");
        return Vec{samples.eval_1d(x[0])};
    }
    Vec out(samples.dim());
    samples.eval_idw(x, out);
    return out;
}

}  // namespace bassmbb

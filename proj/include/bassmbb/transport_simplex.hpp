#pragma once

// Primal network simplex for the dense bipartite transportation problem
//
//     maximize  sum_ij c_ij pi_ij   s.t.  row sums = supply, column sums = demand, pi >= 0.
//
// The basis is a spanning tree on the n + m nodes (rows first, then columns).
// Potentials are recomputed by a tree walk every pivot; entering cells are found
// by block pricing. A long run of degenerate pivots switches to Bland's rule
// until the objective moves again, which rules out cycling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "bassmbb/errors.hpp"

namespace bassmbb::simplex {

struct BasicCell {
    std::size_t row = 0;
    std::size_t col = 0;
    double flow = 0.0;
};

struct TransportSolution {
    std::vector<BasicCell> basis;  // n + m - 1 cells, possibly degenerate
    std::vector<double> row_potential;
    std::vector<double> col_potential;
    double value = 0.0;
    std::size_t pivots = 0;
    std::size_t degenerate_pivots = 0;
};

struct TransportOptions {
    std::size_t max_pivots = 0;  // 0: automatic, 50 * (n + m) * sqrt(n + m) + 10000
    double relative_tolerance = 1e-12;
};

/// `cost` is row-major n x m. `row_order`/`col_order` (optional, may be empty) give
/// the traversal order for the north-west corner start; sorting rows and columns
/// along a common direction gives a near-optimal start for inner-product costs.
[[nodiscard]] inline TransportSolution solve_transport_max(std::span<const double> cost, std::span<const double> supply,
                                                           std::span<const double> demand,
                                                           std::span<const std::size_t> row_order = {},
                                                           std::span<const std::size_t> col_order = {},
                                                           const TransportOptions& opts = {}) {
    const std::size_t n = supply.size();
    const std::size_t m = demand.size();
    if (n == 0 || m == 0) throw Error(Errc::InvalidArgument, "empty transport problem");
    if (cost.size() != n * m) throw Error(Errc::DimensionMismatch, "cost matrix shape");
    const std::size_t nodes = n + m;

    std::vector<std::size_t> rorder(row_order.begin(), row_order.end());
    std::vector<std::size_t> corder(col_order.begin(), col_order.end());
    if (rorder.empty()) {
        rorder.resize(n);
        std::iota(rorder.begin(), rorder.end(), std::size_t{0});
    }
    if (corder.empty()) {
        corder.resize(m);
        std::iota(corder.begin(), corder.end(), std::size_t{0});
    }

    const double supply_total = std::accumulate(supply.begin(), supply.end(), 0.0);
    const double demand_total = std::accumulate(demand.begin(), demand.end(), 0.0);
    if (!(supply_total > 0.0) || !(demand_total > 0.0)) throw Error(Errc::AllZeroWeights, "zero total mass");
    const double demand_scale = supply_total / demand_total;

    double cmax = 0.0;
    for (double c : cost) cmax = std::max(cmax, std::abs(c));
    const double tol = opts.relative_tolerance * std::max(1.0, cmax);

    // North-west corner start: a staircase with exactly n + m - 1 cells.
    std::vector<BasicCell> cells;
    cells.reserve(nodes - 1);
    {
        std::size_t i = 0, j = 0;
        double ra = supply[rorder[0]];
        double rb = demand[corder[0]] * demand_scale;
        for (;;) {
            const double t = std::max(0.0, std::min(ra, rb));
            cells.push_back({rorder[i], corder[j], t});
            ra -= t;
            rb -= t;
            if (i == n - 1 && j == m - 1) break;
            if ((ra <= rb && i < n - 1) || j == m - 1) {
                ++i;
                ra = supply[rorder[i]];
            } else {
                ++j;
                rb = demand[corder[j]] * demand_scale;
            }
        }
    }

    std::vector<std::vector<std::size_t>> adj(nodes);
    auto attach = [&](std::size_t id) {
        adj[cells[id].row].push_back(id);
        adj[n + cells[id].col].push_back(id);
    };
    auto detach = [&](std::size_t id) {
        for (std::size_t node : {cells[id].row, n + cells[id].col}) {
            auto& list = adj[node];
            list.erase(std::find(list.begin(), list.end(), id));
        }
    };
    for (std::size_t id = 0; id < cells.size(); ++id) attach(id);

    std::vector<double> pot(nodes, 0.0);
    std::vector<std::size_t> parent_cell(nodes), depth(nodes);
    std::vector<std::size_t> stack;
    std::vector<char> seen(nodes);
    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();

    auto other_end = [&](std::size_t id, std::size_t node) {
        return node < n ? n + cells[id].col : cells[id].row;
    };
    auto compute_potentials = [&] {
        std::fill(seen.begin(), seen.end(), 0);
        stack.clear();
        stack.push_back(0);
        seen[0] = 1;
        pot[0] = 0.0;
        parent_cell[0] = none;
        depth[0] = 0;
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            for (std::size_t id : adj[u]) {
                const std::size_t v = other_end(id, u);
                if (seen[v]) continue;
                seen[v] = 1;
                parent_cell[v] = id;
                depth[v] = depth[u] + 1;
                // f_i + g_j = c_ij on basic cells.
                pot[v] = cost[cells[id].row * m + cells[id].col] - pot[u];
                stack.push_back(v);
            }
        }
    };

    const std::size_t total = n * m;
    const std::size_t block = std::max<std::size_t>(
        std::min<std::size_t>(total, 64), static_cast<std::size_t>(std::sqrt(static_cast<double>(total))));
    std::size_t scan_pos = 0;
    const double nn = static_cast<double>(nodes);
    const std::size_t max_pivots =
        opts.max_pivots ? opts.max_pivots : static_cast<std::size_t>(50.0 * nn * std::sqrt(nn)) + 10000;
    const std::size_t degenerate_switch = 2 * nodes + 10;

    TransportSolution out;
    std::size_t degenerate_streak = 0;
    std::vector<std::size_t> path_u, path_v, path;

    for (;;) {
        compute_potentials();
        auto reduced = [&](std::size_t idx) {
            const std::size_t i = idx / m, j = idx % m;
            return cost[idx] - pot[i] - pot[n + j];
        };

        const bool bland = degenerate_streak > degenerate_switch;
        std::size_t enter = none;
        if (bland) {
            for (std::size_t idx = 0; idx < total; ++idx)
                if (reduced(idx) > tol) {
                    enter = idx;
                    break;
                }
        } else {
            double best = tol;
            std::size_t scanned = 0;
            while (scanned < total) {
                const std::size_t stop = std::min(total - scanned, block);
                for (std::size_t s = 0; s < stop; ++s) {
                    const double r = reduced(scan_pos);
                    if (r > best) {
                        best = r;
                        enter = scan_pos;
                    }
                    if (++scan_pos == total) scan_pos = 0;
                }
                scanned += stop;
                if (enter != none) break;
            }
        }
        if (enter == none) break;
        if (out.pivots >= max_pivots)
            throw Error(Errc::NoConvergence, "network simplex exceeded pivot limit");

        const std::size_t k = enter / m, l = enter % m;
        // Tree path from column node l to row node k.
        path_u.clear();
        path_v.clear();
        std::size_t u = k, v = n + l;
        while (u != v) {
            if (depth[u] >= depth[v]) {
                path_u.push_back(parent_cell[u]);
                u = other_end(parent_cell[u], u);
            } else {
                path_v.push_back(parent_cell[v]);
                v = other_end(parent_cell[v], v);
            }
        }
        path.assign(path_v.begin(), path_v.end());
        path.insert(path.end(), path_u.rbegin(), path_u.rend());

        // Even positions lose flow, odd positions gain it.
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave_pos = none;
        for (std::size_t p = 0; p < path.size(); p += 2) {
            const BasicCell& c = cells[path[p]];
            const bool better = c.flow < theta ||
                                (bland && c.flow == theta &&
                                 c.row * m + c.col < cells[path[leave_pos]].row * m + cells[path[leave_pos]].col);
            if (better) {
                theta = c.flow;
                leave_pos = p;
            }
        }
        theta = std::max(0.0, theta);
        for (std::size_t p = 0; p < path.size(); ++p) {
            BasicCell& c = cells[path[p]];
            c.flow += (p % 2 == 0) ? -theta : theta;
            if (c.flow < 0.0) c.flow = 0.0;
        }
        const std::size_t leave = path[leave_pos];
        detach(leave);
        cells[leave] = {k, l, theta};
        attach(leave);

        ++out.pivots;
        if (theta <= 0.0) {
            ++out.degenerate_pivots;
            ++degenerate_streak;
        } else {
            degenerate_streak = 0;
        }
    }

    out.basis = cells;
    out.row_potential.assign(pot.begin(), pot.begin() + static_cast<std::ptrdiff_t>(n));
    out.col_potential.assign(pot.begin() + static_cast<std::ptrdiff_t>(n), pot.end());
    for (const auto& c : cells) out.value += c.flow * cost[c.row * m + c.col];
    return out;
}

}  // namespace bassmbb::simplex

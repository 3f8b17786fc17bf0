#pragma once

// CSV formats: measures (x1..xd[,w]), sampled maps (x1..xd,g1..gd), paths
// (path_id,t,x1..xd,b1..bd), profiles (u,value,second_difference) and solver
// traces. Numbers are written in shortest round-trip form, so output is
// byte-stable for equal inputs.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "bassmbb/bass_core.hpp"
#include "bassmbb/errors.hpp"
#include "bassmbb/geometry.hpp"
#include "bassmbb/martingale.hpp"
#include "bassmbb/measures.hpp"
#include "bassmbb/ot_core.hpp"

namespace bassmbb::io {

[[nodiscard]] inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline double parse_double(std::string_view s, const std::string& where) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw Error(Errc::Io, where + ": cannot parse '" + std::string(s) + "' as a number");
    return v;
}

/// Header plus numeric rows; '#' lines and blank lines are skipped.
struct Table {
    std::vector<std::string> header;
    std::vector<Vec> rows;
};

inline Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open " + path);
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        const auto cells = split(s);
        if (t.header.empty()) {
            for (auto c : cells) t.header.emplace_back(c);
            continue;
        }
        if (cells.size() != t.header.size())
            throw Error(Errc::Io, path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                                      " columns, found " + std::to_string(cells.size()));
        Vec row;
        row.reserve(cells.size());
        for (auto c : cells) row.push_back(parse_double(c, path + ":" + std::to_string(lineno)));
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw Error(Errc::Io, path + ": missing header");
    return t;
}

/// Number of leading columns named prefix1, prefix2, ...
inline std::size_t count_prefixed(const std::vector<std::string>& header, std::size_t from, const std::string& prefix) {
    std::size_t d = 0;
    while (from + d < header.size() && header[from + d] == prefix + std::to_string(d + 1)) ++d;
    return d;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + path);
    return out;
}

inline void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw Error(Errc::Io, "write failed for " + path);
}

inline std::string coord_header(const std::string& prefix, std::size_t d) {
    std::string h;
    for (std::size_t k = 0; k < d; ++k) h += (k ? "," : "") + prefix + std::to_string(k + 1);
    return h;
}

}  // namespace detail

/// Reads `x1,...,xd[,w]`. Without a weight column the atoms are equally weighted.
[[nodiscard]] inline DiscreteMeasure read_measure_csv(const std::string& path) {
    const detail::Table t = detail::read_table(path);
    const std::size_t d = detail::count_prefixed(t.header, 0, "x");
    if (d == 0) throw Error(Errc::Io, path + ": header must start with x1");
    const bool weighted = t.header.size() == d + 1 && t.header[d] == "w";
    if (!weighted && t.header.size() != d) throw Error(Errc::Io, path + ": header must be x1,...,xd with optional w");
    if (t.rows.empty()) throw Error(Errc::Io, path + ": no atoms");
    Vec coords, weights;
    coords.reserve(t.rows.size() * d);
    for (const Vec& r : t.rows) {
        coords.insert(coords.end(), r.begin(), r.begin() + static_cast<std::ptrdiff_t>(d));
        weights.push_back(weighted ? r[d] : 1.0);
    }
    try {
        return normalize(DiscreteMeasure(d, std::move(coords), std::move(weights)));
    } catch (const Error& e) {
        throw Error(Errc::Io, path + ": " + e.what());
    }
}

inline void write_measure_csv(const std::string& path, const DiscreteMeasure& m) {
    auto out = detail::open_out(path);
    out << detail::coord_header("x", m.dim()) << ",w\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (double c : m.point(i)) out << format_double(c) << ',';
        out << format_double(m.weight(i)) << '\n';
    }
    detail::finish(out, path);
}

/// Sampled gradient map: `x1..xd,g1..gd`.
inline void write_map_csv(const std::string& path, const MapSamples& map) {
    auto out = detail::open_out(path);
    out << detail::coord_header("x", map.dim()) << ',' << detail::coord_header("g", map.dim()) << '\n';
    for (std::size_t i = 0; i < map.size(); ++i) {
        for (double c : map.point(i)) out << format_double(c) << ',';
        const auto v = map.value(i);
        for (std::size_t k = 0; k < v.size(); ++k) out << format_double(v[k]) << (k + 1 < v.size() ? ',' : '\n');
    }
    detail::finish(out, path);
}

[[nodiscard]] inline MapSamples read_map_csv(const std::string& path) {
    const detail::Table t = detail::read_table(path);
    const std::size_t d = detail::count_prefixed(t.header, 0, "x");
    if (d == 0 || detail::count_prefixed(t.header, d, "g") != d || t.header.size() != 2 * d)
        throw Error(Errc::Io, path + ": header must be x1..xd,g1..gd");
    if (t.rows.empty()) throw Error(Errc::Io, path + ": no samples");
    Vec pts, vals;
    for (const Vec& r : t.rows) {
        pts.insert(pts.end(), r.begin(), r.begin() + static_cast<std::ptrdiff_t>(d));
        vals.insert(vals.end(), r.begin() + static_cast<std::ptrdiff_t>(d), r.end());
    }
    return MapSamples(d, std::move(pts), std::move(vals));
}

inline void write_paths_csv(const std::string& path, const PathEnsemble& e) {
    auto out = detail::open_out(path);
    out << "path_id,t," << detail::coord_header("x", e.dim) << ',' << detail::coord_header("b", e.dim) << '\n';
    std::string line;
    for (std::size_t p = 0; p < e.n_paths; ++p)
        for (std::size_t ti = 0; ti < e.n_times(); ++ti) {
            line = std::to_string(p);
            line += ',';
            line += format_double(e.times[ti]);
            for (double v : e.M(p, ti)) (line += ',') += format_double(v);
            for (double v : e.B(p, ti)) (line += ',') += format_double(v);
            line += '\n';
            out << line;
        }
    detail::finish(out, path);
}

/// Endpoints have no second difference; that cell is left empty.
inline void write_profile_csv(const std::string& path, const ConvexityProfile& p) {
    auto out = detail::open_out(path);
    out << "u,value,second_difference\n";
    for (std::size_t i = 0; i < p.u.size(); ++i) {
        out << format_double(p.u[i]) << ',' << format_double(p.values[i]) << ',';
        if (i > 0 && i + 1 < p.u.size()) out << format_double(p.second_differences[i - 1]);
        out << '\n';
    }
    detail::finish(out, path);
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace) {
    auto out = detail::open_out(path);
    out << "iteration,value,residual,second_moment,step\n";
    for (const auto& r : trace)
        out << r.iteration << ',' << format_double(r.value) << ',' << format_double(r.residual) << ','
            << format_double(r.second_moment) << ',' << format_double(r.step) << '\n';
    detail::finish(out, path);
}

[[nodiscard]] inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    auto out = detail::open_out(path);
    out << text;
    detail::finish(out, path);
}

/// 64-bit FNV-1a.
[[nodiscard]] inline std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace bassmbb::io

#pragma once

// `bassmbb solve|simulate|check`. Reports are JSON, bulk output CSV. Exit codes:
// 0 success, 1 I/O or validation failure, 2 spread detected, 3 iteration cap,
// 4 failed check.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bassmbb/bassmbb.hpp"

namespace bassmbb::cli {

using nlohmann::json;

enum Exit : int { Ok = 0, IoFailure = 1, Spread = 2, IterationCap = 3, CheckFailed = 4 };

struct RunConfig {
    std::string command;
    std::string which;  // check name
    std::string mu, nu, alpha0, out, config_path;

    std::string method = "exact";
    double epsilon = 0.01;
    std::size_t quadrature_nodes = 0;
    std::size_t max_iter = 3000;
    double tol = 1e-2;
    std::size_t particles = 200;
    bool skip_order_check = false;
    std::uint64_t seed = 42;

    std::size_t paths = 10000;
    std::size_t steps = 10;

    double gap_tolerance = 0.05;
    std::size_t profiles = 20;
    std::size_t profile_atoms = 5;
    std::size_t battery_nodes = 0;  // 0: solver default in d = 1, 4 per axis beyond
    double rate_h = 0.05;
    double rate_tolerance = 0.05;
    std::size_t rate_samples = 20;
};

/// The settings that determine results; hashed into every report.
[[nodiscard]] inline json effective_config(const RunConfig& c) {
    return {
        {"version", 1},
        {"seed", c.seed},
        {"inputs", {{"mu", c.mu}, {"nu", c.nu}, {"alpha0", c.alpha0}}},
        {"solver",
         {{"method", c.method},
          {"epsilon", c.epsilon},
          {"quadrature_nodes", c.quadrature_nodes},
          {"max_iter", c.max_iter},
          {"tol", c.tol},
          {"particles", c.particles},
          {"skip_order_check", c.skip_order_check}}},
        {"simulate", {{"paths", c.paths}, {"steps", c.steps}}},
        {"check",
         {{"gap_tolerance", c.gap_tolerance},
          {"profiles", c.profiles},
          {"profile_atoms", c.profile_atoms},
          {"battery_nodes", c.battery_nodes},
          {"rate_h", c.rate_h},
          {"rate_tolerance", c.rate_tolerance},
          {"rate_samples", c.rate_samples}}},
    };
}

[[nodiscard]] inline std::string config_hash(const RunConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(io::fnv1a(effective_config(c).dump())));
    return buf;
}

namespace detail {

template <class T>
void take(const json& obj, const char* key, T& dst) {
    if (obj.contains(key)) dst = obj.at(key).get<T>();
}

inline void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    for (const auto& [k, v] : obj.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) throw Error(Errc::InvalidArgument, "unknown config key '" + where + k + "'");
    }
}

}  // namespace detail

/// Applies a config file onto `c`. Command-line flags are applied afterwards.
inline void load_config_file(const std::string& path, RunConfig& c) {
    json j;
    try {
        j = json::parse(io::read_text(path));
    } catch (const json::exception& e) {
        throw Error(Errc::Io, path + ": " + e.what());
    }
    if (!j.is_object()) throw Error(Errc::Io, path + ": config must be a JSON object");
    if (!j.contains("version") || j.at("version") != 1) throw Error(Errc::InvalidArgument, path + ": config needs \"version\": 1");
    try {
        detail::reject_unknown(j, {"version", "seed", "solver", "simulate", "check"}, "");
        detail::take(j, "seed", c.seed);
        if (j.contains("solver")) {
            const json& s = j.at("solver");
            detail::reject_unknown(s, {"method", "epsilon", "quadrature_nodes", "max_iter", "tol", "particles", "skip_order_check"},
                                   "solver.");
            detail::take(s, "method", c.method);
            detail::take(s, "epsilon", c.epsilon);
            detail::take(s, "quadrature_nodes", c.quadrature_nodes);
            detail::take(s, "max_iter", c.max_iter);
            detail::take(s, "tol", c.tol);
            detail::take(s, "particles", c.particles);
            detail::take(s, "skip_order_check", c.skip_order_check);
        }
        if (j.contains("simulate")) {
            const json& s = j.at("simulate");
            detail::reject_unknown(s, {"paths", "steps"}, "simulate.");
            detail::take(s, "paths", c.paths);
            detail::take(s, "steps", c.steps);
        }
        if (j.contains("check")) {
            const json& s = j.at("check");
            detail::reject_unknown(s, {"gap_tolerance", "profiles", "profile_atoms", "battery_nodes", "rate_h",
                                       "rate_tolerance", "rate_samples"},
                                   "check.");
            detail::take(s, "gap_tolerance", c.gap_tolerance);
            detail::take(s, "profiles", c.profiles);
            detail::take(s, "profile_atoms", c.profile_atoms);
            detail::take(s, "battery_nodes", c.battery_nodes);
            detail::take(s, "rate_h", c.rate_h);
            detail::take(s, "rate_tolerance", c.rate_tolerance);
            detail::take(s, "rate_samples", c.rate_samples);
        }
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidArgument, path + ": " + e.what());
    }
}

inline void validate(const RunConfig& c) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw Error(Errc::InvalidArgument, std::string(name) + " must be positive");
    };
    if (c.method != "exact" && c.method != "entropic") throw Error(Errc::InvalidArgument, "method must be exact or entropic");
    positive(c.epsilon, "epsilon");
    positive(c.tol, "tol");
    positive(static_cast<double>(c.max_iter), "max_iter");
    positive(static_cast<double>(c.particles), "particles");
    positive(static_cast<double>(c.paths), "paths");
    positive(static_cast<double>(c.steps), "steps");
    positive(c.gap_tolerance, "gap_tolerance");
    positive(c.rate_h, "rate_h");
    positive(c.rate_tolerance, "rate_tolerance");
    for (const std::string* f : {&c.mu, &c.nu, &c.alpha0})
        if (!f->empty() && !std::filesystem::is_regular_file(*f)) throw Error(Errc::Io, "no such file: " + *f);
}

[[nodiscard]] inline BassConfig solver_config(const RunConfig& c) {
    BassConfig b;
    b.quadrature_nodes = c.quadrature_nodes;
    b.max_iter = c.max_iter;
    b.tol = c.tol;
    b.skip_order_check = c.skip_order_check;
    if (c.method == "entropic") {
        b.ot.method = OtMethod::Entropic;
        b.ot.entropic.epsilon = c.epsilon;
    }
    return b;
}

/// Default starting cloud: an equispaced grid (tensor grid beyond d = 1) over
/// barycenter(nu) +- 1.5 standard deviations of nu.
[[nodiscard]] inline DiscreteMeasure default_alpha0(const DiscreteMeasure& nu, std::size_t particles) {
    const std::size_t d = nu.dim();
    const Vec mean = barycenter(nu);
    double var = second_moment(nu);
    for (double m : mean) var -= m * m;
    const double half = 1.5 * std::sqrt(std::max(var, 0.0) / static_cast<double>(d)) + 1e-3;
    const auto per_axis = static_cast<std::size_t>(
        std::max(2.0, std::ceil(std::pow(static_cast<double>(particles), 1.0 / static_cast<double>(d)) - 1e-9)));
    std::size_t total = 1;
    for (std::size_t k = 0; k < d; ++k) total *= per_axis;
    Vec coords(total * d);
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t r = i;
        for (std::size_t k = 0; k < d; ++k) {
            const std::size_t j = r % per_axis;
            r /= per_axis;
            coords[i * d + k] = mean[k] - half + 2.0 * half * static_cast<double>(j) / static_cast<double>(per_axis - 1);
        }
    }
    return DiscreteMeasure::uniform(d, std::move(coords));
}

struct Instance {
    DiscreteMeasure mu, nu;
};

[[nodiscard]] inline Instance load_instance(const RunConfig& c) {
    if (c.mu.empty() || c.nu.empty()) throw Error(Errc::InvalidArgument, "--mu and --nu are required");
    Instance in{io::read_measure_csv(c.mu), io::read_measure_csv(c.nu)};
    require_same_dim(in.mu, in.nu);
    return in;
}

[[nodiscard]] inline BassSolution run_solver(const RunConfig& c, const Instance& in) {
    const DiscreteMeasure alpha0 = c.alpha0.empty() ? default_alpha0(in.nu, c.particles) : io::read_measure_csv(c.alpha0);
    return minimize_V(in.mu, in.nu, alpha0, solver_config(c));
}

[[nodiscard]] inline json report_header(const RunConfig& c) {
    return {{"version", 1}, {"command", c.command}, {"config_hash", config_hash(c)}, {"config", effective_config(c)}};
}

inline std::string join(const std::string& dir, const char* name) {
    return (std::filesystem::path(dir) / name).string();
}

inline void ensure_out(const RunConfig& c) {
    if (c.out.empty()) throw Error(Errc::InvalidArgument, "--out is required");
    std::error_code ec;
    std::filesystem::create_directories(c.out, ec);
    if (ec) throw Error(Errc::Io, "cannot create " + c.out + ": " + ec.message());
}

inline int cmd_solve(const RunConfig& c) {
    const Instance in = load_instance(c);
    const BassSolution sol = run_solver(c, in);
    json rep = report_header(c);
    rep["status"] = to_string(sol.status);
    rep["value"] = sol.value;
    rep["residual"] = sol.residual;
    rep["iterations"] = sol.iterations;
    rep["dim"] = sol.alpha_hat.dim();
    rep["second_moment"] = second_moment(sol.alpha_hat);
    json m2 = json::array();
    for (const auto& r : sol.trace) m2.push_back(r.second_moment);
    rep["m2_trace"] = std::move(m2);
    io::write_text(join(c.out, "report.json"), rep.dump(2) + "\n");
    io::write_measure_csv(join(c.out, "alpha_hat.csv"), sol.alpha_hat);
    io::write_trace_csv(join(c.out, "trace.csv"), sol.trace);
    io::write_map_csv(join(c.out, "v_map.csv"), sol.v_map);
    io::write_map_csv(join(c.out, "phi_map.csv"), sol.phi_map);
    std::fprintf(stderr, "bassmbb: %s after %zu iterations, V = %.6g, residual = %.3g\n", to_string(sol.status),
                 sol.iterations, sol.value, sol.residual);
    switch (sol.status) {
        case BassStatus::Converged: return Ok;
        case BassStatus::SpreadDetected: return Spread;
        case BassStatus::MaxIter: return IterationCap;
    }
    return IterationCap;
}

inline PathEnsemble simulate_solution(const RunConfig& c, const BassMartingaleModel& model) {
    return simulate_paths(model, c.paths, c.steps, c.seed);
}

inline int cmd_simulate(RunConfig c) {
    for (const char* f : {"alpha_hat.csv", "v_map.csv", "phi_map.csv"})
        if (!std::filesystem::is_regular_file(join(c.out, f)))
            throw Error(Errc::Io, "missing solve artifact " + join(c.out, f) + "; run solve first");
    // Marginals default to the ones the solve was run with.
    if (c.mu.empty() || c.nu.empty()) {
        const std::string rp = join(c.out, "report.json");
        if (!std::filesystem::is_regular_file(rp)) throw Error(Errc::Io, "missing solve artifact " + rp);
        json prior;
        try {
            prior = json::parse(io::read_text(rp));
            if (c.mu.empty()) c.mu = prior.at("config").at("inputs").at("mu").get<std::string>();
            if (c.nu.empty()) c.nu = prior.at("config").at("inputs").at("nu").get<std::string>();
        } catch (const json::exception& e) {
            throw Error(Errc::Io, rp + ": " + e.what());
        }
        validate(c);
    }
    const Instance in = load_instance(c);
    BassMartingaleModel model;
    model.alpha_hat = io::read_measure_csv(join(c.out, "alpha_hat.csv"));
    model.v_map = io::read_map_csv(join(c.out, "v_map.csv"));
    model.phi_map = io::read_map_csv(join(c.out, "phi_map.csv"));
    if (model.v_map.dim() != model.dim() || model.dim() != in.mu.dim())
        throw Error(Errc::Io, "solve artifacts disagree in dimension");
    model.rule = simulation_rule(model.dim());
    model.rng_seed = c.seed;
    const PathEnsemble e = simulate_solution(c, model);
    io::write_paths_csv(join(c.out, "paths.csv"), e);

    const MarginalErrors err = marginal_error(e, in.mu, in.nu);
    const MonteCarloEstimate tr = expected_trace_sigma_estimate(e);
    const IncrementCheck inc = martingale_increment_check(e, 0, e.n_times() - 1);
    json rep = report_header(c);
    rep["seed"] = c.seed;
    rep["paths"] = c.paths;
    rep["steps"] = c.steps;
    rep["e0"] = err.e0;
    rep["e1"] = err.e1;
    rep["floor_mu"] = resampling_floor(in.mu, c.paths, c.seed + 1);
    rep["floor_nu"] = resampling_floor(in.nu, c.paths, c.seed + 2);
    rep["E_tr_sigma"] = tr.mean;
    rep["E_tr_sigma_se"] = tr.standard_error;
    rep["increment_max_z"] = inc.max_z;
    io::write_text(join(c.out, "marginals.json"), rep.dump(2) + "\n");
    std::fprintf(stderr, "bassmbb: e0 = %.4g, e1 = %.4g, E_tr_sigma = %.4g\n", err.e0, err.e1, tr.mean);
    return Ok;
}

inline int finish_check(const RunConfig& c, json rep, bool pass, const std::string& violated) {
    rep["check"] = c.which;
    rep["pass"] = pass;
    if (!pass) rep["violated"] = violated;
    io::write_text(join(c.out, ("check_" + c.which + ".json").c_str()), rep.dump(2) + "\n");
    if (!pass) {
        std::fprintf(stderr, "bassmbb: check %s failed: %s\n", c.which.c_str(), violated.c_str());
        return CheckFailed;
    }
    std::fprintf(stderr, "bassmbb: check %s passed\n", c.which.c_str());
    return Ok;
}

inline int check_order(const RunConfig& c, const Instance& in) {
    const ConvexOrderCertificate cert = check_convex_order(in.mu, in.nu);
    json rep = report_header(c);
    rep["in_order"] = cert.in_order;
    rep["violation"] = cert.violation;
    rep["barycenter_mismatch"] = cert.barycenter_mismatch;
    rep["detail"] = cert.detail;
    if (cert.violating_strike) rep["violating_strike"] = *cert.violating_strike;
    if (cert.coupling) {
        std::size_t support = 0;
        for (double m : cert.coupling->mass) support += m > 0.0;
        rep["coupling_support"] = support;
    }
    return finish_check(c, std::move(rep), cert.in_order, "convex order: " + cert.detail);
}

inline int check_duality(const RunConfig& c, const Instance& in) {
    const BassSolution sol = run_solver(c, in);
    const DualityGapReport g = duality_gap(sol, in.mu, in.nu);
    json rep = report_header(c);
    rep["dual_value"] = g.dual_value;
    rep["primal_value"] = g.primal_value;
    rep["gap"] = g.gap;
    rep["psi_grid_span"] = {g.psi_grid_lo, g.psi_grid_hi};
    rep["solver_status"] = to_string(sol.status);
    rep["solver_value"] = sol.value;
    const bool pass = std::abs(g.gap) <= c.gap_tolerance && !g.weak_duality_violated;
    return finish_check(c, std::move(rep), pass,
                        "gap = " + io::format_double(g.gap) + " (tolerance " + io::format_double(c.gap_tolerance) + ")");
}

namespace detail {

inline DiscreteMeasure random_cloud(std::mt19937_64& gen, std::size_t dim, std::size_t atoms) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double scale = 0.3 + 1.7 * unif(gen);
    Vec shift(dim);
    for (double& s : shift) s = normal(gen);
    Vec coords(atoms * dim), weights(atoms);
    for (std::size_t i = 0; i < atoms; ++i) {
        for (std::size_t k = 0; k < dim; ++k) coords[i * dim + k] = shift[k] + scale * normal(gen);
        weights[i] = 0.2 + unif(gen);
    }
    return normalize(DiscreteMeasure(dim, std::move(coords), std::move(weights)));
}

}  // namespace detail

/// Random endpoint pairs; McCann geodesics in d = 1, generalized geodesics with
/// base mu beyond.
inline int check_convexity(const RunConfig& c, const Instance& in) {
    const std::size_t d = in.mu.dim();
    BassConfig cfg = solver_config(c);
    cfg.quadrature_nodes = c.battery_nodes ? c.battery_nodes : d == 1 ? c.quadrature_nodes : 4;
    std::mt19937_64 gen(c.seed);
    const Vec grid = uniform_grid(9);
    const std::string dir = join(c.out, "profiles");
    std::filesystem::create_directories(dir);
    json rows = json::array();
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c.profiles; ++k) {
        const DiscreteMeasure a0 = detail::random_cloud(gen, d, c.profile_atoms);
        const DiscreteMeasure a1 = detail::random_cloud(gen, d, c.profile_atoms);
        const GeodesicCurve curve = d == 1 ? mccann_curve_1d(a0, a1) : generalized_curve(a0, a1, in.mu, cfg.ot);
        const ConvexityProfile p = convexity_profile(Functional::V, curve, in.mu, in.nu, grid, cfg);
        const double rel = p.min_second_difference / profile_scale(p);
        worst = std::min(worst, rel);
        char name[32];
        std::snprintf(name, sizeof name, "profile_%03zu.csv", k);
        io::write_profile_csv(join(dir, name), p);
        rows.push_back({{"curve", to_string(curve.kind)}, {"min_second_difference", p.min_second_difference},
                        {"scale", profile_scale(p)}});
    }
    json rep = report_header(c);
    rep["profiles"] = std::move(rows);
    rep["worst_relative_second_difference"] = worst;
    rep["bound"] = -1e-6;
    return finish_check(c, std::move(rep), worst >= -1e-6,
                        "second difference / scale = " + io::format_double(worst) + " below -1e-6");
}

/// Rate of MCov along the heat flow from mu, for the Bass measure and for random
/// clouds, against the path estimate of E int tr(sigma).
inline int check_rate(const RunConfig& c, const Instance& in) {
    const BassSolution sol = run_solver(c, in);
    const std::size_t d = in.mu.dim();
    const QuadratureRule rule = quadrature_for(solver_config(c), d);
    const MarginalFlow flow{{0.0, in.mu}, {c.rate_h, gaussian_smooth(in.mu, c.rate_h, rule)}};
    const double rate_hat = mcov_rate(sol.alpha_hat, flow, 0.0, c.rate_h, rule);
    BassMartingaleModel model = BassMartingaleModel::from_solution(sol, c.seed);
    const MonteCarloEstimate tr = expected_trace_sigma_estimate(simulate_solution(c, model));
    std::mt19937_64 gen(c.seed);
    double min_rate = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c.rate_samples; ++k)
        min_rate = std::min(min_rate, mcov_rate(detail::random_cloud(gen, d, 50), flow, 0.0, c.rate_h, rule));
    json rep = report_header(c);
    rep["rate_bass"] = rate_hat;
    rep["E_tr_sigma"] = tr.mean;
    rep["E_tr_sigma_se"] = tr.standard_error;
    rep["min_rate_random"] = min_rate;
    rep["h"] = c.rate_h;
    const double target = tr.mean;
    const bool match = std::abs(rate_hat - target) <= c.rate_tolerance * std::abs(target);
    const bool lower = c.rate_samples == 0 || min_rate >= (1.0 - c.rate_tolerance) * target;
    std::string why;
    if (!match) why = "rate with the Bass measure " + io::format_double(rate_hat) + " vs E_tr_sigma " + io::format_double(target);
    else if (!lower) why = "random rate " + io::format_double(min_rate) + " below E_tr_sigma " + io::format_double(target);
    return finish_check(c, std::move(rep), match && lower, why);
}

inline int cmd_check(const RunConfig& c) {
    const Instance in = load_instance(c);
    if (c.which == "order") return check_order(c, in);
    if (c.which == "duality") return check_duality(c, in);
    if (c.which == "convexity") return check_convexity(c, in);
    if (c.which == "rate") return check_rate(c, in);
    throw Error(Errc::InvalidArgument, "unknown check " + c.which);
}

[[nodiscard]] inline int run(int argc, char** argv) {
    CLI::App app{"Martingale Benamou-Brenier solver via the Bass functional"};
    app.require_subcommand(1);
    RunConfig c;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> method;
    std::optional<double> epsilon;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--mu", c.mu, "source measure CSV");
        sub->add_option("--nu", c.nu, "target measure CSV");
        sub->add_option("--alpha0", c.alpha0, "initial Bass measure CSV");
        sub->add_option("--out", c.out, "output directory")->required();
        sub->add_option("--config", c.config_path, "config JSON with \"version\": 1");
        sub->add_option("--seed", seed, "64-bit seed");
        sub->add_option("--method", method, "exact|entropic")->check(CLI::IsMember({"exact", "entropic"}));
        sub->add_option("--epsilon", epsilon, "entropic regularisation");
    };
    CLI::App* solve = app.add_subcommand("solve", "minimize V and write alpha_hat, maps, trace and report");
    CLI::App* simulate = app.add_subcommand("simulate", "simulate the Bass martingale of a previous solve");
    CLI::App* check = app.add_subcommand("check", "run a duality, convexity, rate or order check");
    common(solve);
    common(simulate);
    common(check);
    check->add_option("which", c.which, "duality|convexity|rate|order")
        ->required()
        ->check(CLI::IsMember({"duality", "convexity", "rate", "order"}));
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Ok : IoFailure;
    }
    c.command = app.get_subcommands().front()->get_name();
    try {
        if (!c.config_path.empty()) load_config_file(c.config_path, c);
        if (seed) c.seed = *seed;
        if (method) c.method = *method;
        if (epsilon) c.epsilon = *epsilon;
        validate(c);
        ensure_out(c);
        if (c.command == "solve") return cmd_solve(c);
        if (c.command == "simulate") return cmd_simulate(c);
        return cmd_check(c);
    } catch (const Error& e) {
        std::fprintf(stderr, "bassmbb: %s\n", e.what());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "bassmbb: %s\n", e.what());
    }
    return IoFailure;
}

}  // namespace bassmbb::cli

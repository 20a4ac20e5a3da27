#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>

#include "switching/io.hpp"
#include "switching/scheme.hpp"
#include "switching/strategy.hpp"
#include "switching/verify.hpp"

namespace switching::cli {

/// Exit-code contract shared by all commands.
enum ExitCode : int { ok = 0, input_error = 1, not_converged = 2, audit_failed = 3 };

struct RunConfig {
    std::filesystem::path problem;
    BackendKind backend = BackendKind::deterministic;
    std::size_t steps = 2000;
    std::optional<double> tol;  ///< defaults per backend
    std::size_t max_iter = 500;
    std::uint64_t seed = 42;
    std::filesystem::path out = ".";
    int mode = 1;
    std::size_t paths = 100000;
    double horizon = 1.0;        ///< verify-fixtures only
    double tamper_scale = 1.0;   ///< verify-fixtures only: scales Y^{+,1} of family 1
};

namespace detail {

inline bool check_config(const RunConfig& cfg, std::ostream& err) {
    if (cfg.steps < 2) {
        err << "error: --steps must be at least 2\n";
        return false;
    }
    if (cfg.tol && !(*cfg.tol > 0.0)) {
        err << "error: --tol must be positive\n";
        return false;
    }
    if (cfg.max_iter < 1) {
        err << "error: --max-iter must be at least 1\n";
        return false;
    }
    std::error_code ec;
    std::filesystem::create_directories(cfg.out, ec);
    if (ec || !std::filesystem::is_directory(cfg.out)) {
        err << "error: output directory " << cfg.out << " is not writable\n";
        return false;
    }
    return true;
}

inline std::optional<SwitchingProblem> load(const RunConfig& cfg, std::ostream& err) {
    try {
        return io::load_problem(cfg.problem);
    } catch (const std::exception& e) {
        err << "error: " << cfg.problem.string() << ": " << e.what() << '\n';
        return std::nullopt;
    }
}

inline Backend make_backend(const RunConfig& cfg, const SwitchingProblem& p) {
    return Backend::make(cfg.backend, TimeGrid(p.horizon, cfg.steps));
}

inline SchemeOptions options(const RunConfig& cfg) {
    auto o = SchemeOptions::defaults_for(cfg.backend);
    if (cfg.tol) o.tol = *cfg.tol;
    o.max_iter = cfg.max_iter;
    return o;
}

}  // namespace detail

/// Validates the problem file; prints the report as JSON.
inline int cmd_check_assumptions(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (!detail::check_config(cfg, err)) return input_error;
    const auto problem = detail::load(cfg, err);
    if (!problem) return input_error;
    const auto report = validate_assumptions(*problem, detail::make_backend(cfg, *problem));
    out << io::to_json(report).dump(2) << '\n';
    if (!report.all_passed()) err << report.summary();
    return report.all_passed() ? ok : input_error;
}

/// Solves the system and writes surfaces, trace.csv and summary.json to cfg.out.
inline int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (!detail::check_config(cfg, err)) return input_error;
    const auto problem = detail::load(cfg, err);
    if (!problem) return input_error;
    const auto backend = detail::make_backend(cfg, *problem);
    try {
        const auto [sol, trace] = solve_system(*problem, backend, detail::options(cfg));
        io::write_solution_surfaces(cfg.out, sol);
        io::write_trace_csv(cfg.out / "trace.csv", trace);
        const auto summary = io::summary_json(sol, trace);
        io::write_json(cfg.out / "summary.json", summary);
        out << summary.dump(2) << '\n';
        return trace.converged ? ok : not_converged;
    } catch (const ValidationError& e) {
        err << e.what();
        io::write_json(cfg.out / "validation.json", io::to_json(e.report()));
        return input_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return input_error;
    }
}

/// Audits both closed-form families; exit 0 iff every threshold holds.
inline int cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (!detail::check_config(cfg, err)) return input_error;
    if (!(cfg.horizon > 0.0)) {
        err << "error: --horizon must be positive\n";
        return input_error;
    }
    const auto r = check_nonuniqueness(cfg.horizon, cfg.steps, cfg.tamper_scale);
    nlohmann::json doc{{"horizon", r.horizon},
                       {"steps", r.steps},
                       {"thresholds", io::to_json(r.thresholds)},
                       {"family1", io::to_json(r.family1)},
                       {"family2", io::to_json(r.family2)},
                       {"family1_passes", r.family1_passes},
                       {"family2_passes", r.family2_passes},
                       {"family1_failures", r.thresholds.failures(r.family1)},
                       {"family2_failures", r.thresholds.failures(r.family2)},
                       {"sup_distance", r.sup_distance},
                       {"distance_at_zero", r.distance_at_zero},
                       {"family1_below_family2", r.ordered},
                       {"confirmed", r.confirmed()}};
    io::write_json(cfg.out / "verify.json", doc);
    out << doc.dump(2) << '\n';
    return r.confirmed() ? ok : audit_failed;
}

/// Solves, then follows the extracted stopping rule; writes strategy.json.
inline int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (!detail::check_config(cfg, err)) return input_error;
    if (cfg.mode != 1 && cfg.mode != 2) {
        err << "error: --mode must be 1 or 2\n";
        return input_error;
    }
    if (cfg.paths < 1) {
        err << "error: --paths must be at least 1\n";
        return input_error;
    }
    const auto problem = detail::load(cfg, err);
    if (!problem) return input_error;
    const auto backend = detail::make_backend(cfg, *problem);
    try {
        const auto [sol, trace] = solve_system(*problem, backend, detail::options(cfg));
        if (!trace.converged) err << "warning: scheme stopped with status " << to_string(trace.status) << '\n';
        const auto report = simulate_policy(sol, cfg.paths, cfg.seed, cfg.mode);
        auto doc = io::to_json(report);
        doc["scheme_status"] = to_string(trace.status);
        io::write_json(cfg.out / "strategy.json", doc);
        out << doc.dump(2) << '\n';
        return ok;
    } catch (const ValidationError& e) {
        err << e.what();
        return input_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return input_error;
    }
}

}  // namespace switching::cli

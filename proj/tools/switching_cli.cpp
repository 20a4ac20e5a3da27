#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "switching/cli.hpp"

namespace {

void add_grid_options(CLI::App* cmd, switching::cli::RunConfig& cfg, std::string& backend) {
    cmd->add_option("--backend", backend, "deterministic or binomial")
        ->check(CLI::IsMember({"deterministic", "binomial"}))
        ->capture_default_str();
    cmd->add_option("--steps", cfg.steps, "number of time steps N")->check(CLI::Range(2, 1 << 20))->capture_default_str();
    cmd->add_option("--out", cfg.out, "output directory")->capture_default_str();
}

void add_scheme_options(CLI::App* cmd, switching::cli::RunConfig& cfg) {
    cmd->add_option("--problem", cfg.problem, "problem definition (JSON)")->required();
    cmd->add_option_function<double>("--tol", [&cfg](double v) { cfg.tol = v; },
                                     "sup-norm stopping tolerance (default 1e-8 deterministic, 1e-4 binomial)");
    cmd->add_option("--max-iter", cfg.max_iter, "maximum number of scheme iterations")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    using namespace switching::cli;
    CLI::App app{"Two-mode full-balance-sheet optimal switching solver"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string backend = "deterministic";

    auto* check = app.add_subcommand("check-assumptions", "validate a problem file");
    check->add_option("--problem", cfg.problem, "problem definition (JSON)")->required();
    add_grid_options(check, cfg, backend);

    auto* solve = app.add_subcommand("solve", "run the monotone scheme and write surfaces");
    add_scheme_options(solve, cfg);
    add_grid_options(solve, cfg, backend);

    auto* verify = app.add_subcommand("verify-fixtures", "audit the closed-form counter-example families");
    verify->add_option("--horizon", cfg.horizon, "horizon T")->capture_default_str();
    verify->add_option("--tamper-scale", cfg.tamper_scale, "scale family-1 Y^{+,1} (auditor self-test)");
    add_grid_options(verify, cfg, backend);

    auto* simulate = app.add_subcommand("simulate", "solve, then follow the extracted stopping rule");
    add_scheme_options(simulate, cfg);
    add_grid_options(simulate, cfg, backend);
    simulate->add_option("--mode", cfg.mode, "starting mode")->check(CLI::IsMember({1, 2}))->capture_default_str();
    simulate->add_option("--paths", cfg.paths, "number of sampled paths")->capture_default_str();
    simulate->add_option("--seed", cfg.seed, "path sampling seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : input_error;
    }

    cfg.backend = switching::parse_backend_kind(backend);
    if (*check) return cmd_check_assumptions(cfg, std::cout, std::cerr);
    if (*solve) return cmd_solve(cfg, std::cout, std::cerr);
    if (*verify) return cmd_verify(cfg, std::cout, std::cerr);
    return cmd_simulate(cfg, std::cout, std::cerr);
}

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "switching/cli.hpp"
#include "switching/io.hpp"

namespace switching {
namespace {

namespace fs = std::filesystem;

const fs::path problems_dir{SWITCHING_PROBLEMS_DIR};

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("switching_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SWITCHING_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void expect_same_problem(const SwitchingProblem& a, const SwitchingProblem& b) {
    EXPECT_EQ(a.horizon, b.horizon);
    for (double t : {0.0, 0.37, 1.0}) {
        for (Component c : all_components)
            for (double y : {-1.0, 2.0}) EXPECT_EQ(a.drivers[c](t, 0.5, y, 0.25), b.drivers[c](t, 0.5, y, 0.25));
        for (int m = 1; m <= 2; ++m) {
            EXPECT_EQ(a.switching(m, t), b.switching(m, t));
            EXPECT_EQ(a.exit_loss(m, t), b.exit_loss(m, t));
            EXPECT_EQ(a.exit_gain(m, t), b.exit_gain(m, t));
        }
    }
    for (Component c : all_components) {
        EXPECT_EQ(a.terminal[c].intercept, b.terminal[c].intercept);
        EXPECT_EQ(a.terminal[c].slope, b.terminal[c].slope);
    }
}

TEST(ParseProblem, CounterexampleFileMatchesBuilder) {
    expect_same_problem(io::load_problem(problems_dir / "counterexample.json"), counterexample_problem(1.0));
}

TEST(ParseProblem, JsonRoundTrip) {
    auto p = counterexample_problem(2.0);
    p.exit_benefit[0] = CoefficientFunction::polynomial({0.1, 0.2}).without_derivative();
    p.terminal[Component::cost2] = StateFunction{0.5, -0.25};
    const auto back = io::parse_problem(io::to_json(p));
    expect_same_problem(back, p);
    EXPECT_FALSE(back.exit_benefit[0].has_derivative());
}

TEST(ParseProblem, ErrorsNameTheField) {
    auto doc = io::to_json(counterexample_problem(1.0));
    doc["drivers"][2]["c1"] = "two";
    try {
        (void)io::parse_problem(doc);
        FAIL() << "expected FormatError";
    } catch (const io::FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("/drivers/2/c1"), std::string::npos) << e.what();
    }
    auto dup = io::to_json(counterexample_problem(1.0));
    dup["terminals"][1] = dup["terminals"][0];
    EXPECT_THROW((void)io::parse_problem(dup), io::FormatError);
    auto bad_kind = io::to_json(counterexample_problem(1.0));
    bad_kind["costs"][0]["kind"] = "spline";
    EXPECT_THROW((void)io::parse_problem(bad_kind), io::FormatError);
    EXPECT_THROW((void)io::parse_problem_text("{ not json"), io::FormatError);
    EXPECT_THROW((void)io::load_problem("/nonexistent/problem.json"), io::FormatError);
}

TEST(SurfaceCsv, RoundTripReproducesAudit) {
    for (auto kind : {BackendKind::deterministic, BackendKind::binomial}) {
        const auto p = kind == BackendKind::deterministic ? counterexample_problem(1.0)
                                                          : io::load_problem(problems_dir / "stochastic.json");
        const auto b = Backend::make(kind, TimeGrid(1.0, 60));
        const auto [sol, trace] = solve_system(p, b, SchemeOptions::defaults_for(kind));
        ASSERT_TRUE(trace.converged);
        const auto dir = scratch("csv_" + to_string(kind));
        io::write_solution_surfaces(dir, sol);
        const auto back = io::read_solution_surfaces(dir, b);
        const auto direct = audit_solution(surfaces_of(sol), p, b);
        const auto reread = audit_solution(back, p, b);
        for (Component c : all_components) {
            EXPECT_NEAR(direct.components[c].max_step_residual, reread.components[c].max_step_residual, 1e-12);
            EXPECT_NEAR(direct.components[c].constraint_violation, reread.components[c].constraint_violation, 1e-12);
            EXPECT_NEAR(direct.components[c].skorokhod_sum, reread.components[c].skorokhod_sum, 1e-12);
            for (std::size_t i = 0; i < b.total_nodes(); ++i) EXPECT_EQ(back.y[c].values()[i], sol.y(c).values()[i]);
        }
    }
}

TEST(SurfaceCsv, RejectsMalformedFiles) {
    const auto dir = scratch("csv_bad");
    const auto b = Backend::deterministic(TimeGrid(1.0, 2));
    {
        std::ofstream(dir / "header.csv") << "k,j,v\n0,0,1\n";
        std::ofstream(dir / "short.csv") << "step,node,value\n0,0,1\n1,0,2\n";
        std::ofstream(dir / "range.csv") << "step,node,value\n0,0,1\n1,1,2\n2,0,3\n";
    }
    EXPECT_THROW((void)io::read_surface_csv(dir / "header.csv", b), io::FormatError);
    EXPECT_THROW((void)io::read_surface_csv(dir / "short.csv", b), io::FormatError);
    EXPECT_THROW((void)io::read_surface_csv(dir / "range.csv", b), io::FormatError);
}

TEST(Commands, SolveCounterexample) {
    cli::RunConfig cfg;
    cfg.problem = problems_dir / "counterexample.json";
    cfg.out = scratch("solve");
    std::ostringstream out, err;
    ASSERT_EQ(cli::cmd_solve(cfg, out, err), cli::ok) << err.str();
    const auto summary = io::json::parse(slurp(cfg.out / "summary.json"));
    EXPECT_TRUE(summary["converged"].get<bool>());
    EXPECT_NEAR(summary["y0"]["plus_1"].get<double>(), std::exp(1.0), 1e-3);
    EXPECT_TRUE(fs::exists(cfg.out / "Y_minus_2.csv"));
    EXPECT_TRUE(fs::exists(cfg.out / "K_plus_1.csv"));
    EXPECT_EQ(slurp(cfg.out / "trace.csv").rfind("iteration,delta\n", 0), 0U);
}

TEST(Commands, SolveReportsNonConvergence) {
    cli::RunConfig cfg;
    cfg.problem = problems_dir / "stochastic.json";
    cfg.backend = BackendKind::binomial;
    cfg.steps = 40;
    cfg.tol = 1e-300;
    cfg.max_iter = 1;
    cfg.out = scratch("noconv");
    std::ostringstream out, err;
    EXPECT_EQ(cli::cmd_solve(cfg, out, err), cli::not_converged);
}

TEST(Commands, InvalidProblemWritesValidationReport) {
    cli::RunConfig cfg;
    cfg.problem = problems_dir / "ell_zero.json";
    cfg.steps = 200;
    cfg.out = scratch("invalid");
    std::ostringstream out, err;
    EXPECT_EQ(cli::cmd_check_assumptions(cfg, out, err), cli::input_error);
    EXPECT_NE(err.str().find("A2"), std::string::npos);
    EXPECT_EQ(cli::cmd_solve(cfg, out, err), cli::input_error);
    const auto report = io::json::parse(slurp(cfg.out / "validation.json"));
    EXPECT_FALSE(report["all_passed"].get<bool>());
}

TEST(Commands, VerifyAndTamper) {
    cli::RunConfig cfg;
    cfg.out = scratch("verify");
    std::ostringstream out, err;
    EXPECT_EQ(cli::cmd_verify(cfg, out, err), cli::ok);
    EXPECT_TRUE(io::json::parse(slurp(cfg.out / "verify.json"))["confirmed"].get<bool>());
    cfg.tamper_scale = 1.01;
    EXPECT_EQ(cli::cmd_verify(cfg, out, err), cli::audit_failed);
}

TEST(Commands, SimulateCounterexample) {
    cli::RunConfig cfg;
    cfg.problem = problems_dir / "counterexample.json";
    cfg.out = scratch("simulate");
    std::ostringstream out, err;
    ASSERT_EQ(cli::cmd_simulate(cfg, out, err), cli::ok) << err.str();
    const auto doc = io::json::parse(slurp(cfg.out / "strategy.json"));
    EXPECT_EQ(doc["profit"]["first_action"], "terminate");
    EXPECT_EQ(doc["profit"]["first_stop_step"], 0);
    EXPECT_LE(doc["profit"]["gap"].get<double>(), 1e-6);
}

TEST(Binary, ExitCodes) {
    const auto dir = scratch("binary");
    const std::string out = " --out " + dir.string();
    EXPECT_EQ(run_cli("check-assumptions --problem " + (problems_dir / "counterexample.json").string() + out), 0);
    EXPECT_EQ(run_cli("check-assumptions --problem " + (problems_dir / "ell_zero.json").string() + out), 1);
    EXPECT_EQ(run_cli("solve --problem /nonexistent.json" + out), 1);
    EXPECT_EQ(run_cli("solve --problem " + (problems_dir / "zero.json").string() + " --steps 1" + out), 1);
    EXPECT_EQ(run_cli("solve --problem " + (problems_dir / "zero.json").string() + " --backend trinomial" + out), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    EXPECT_EQ(run_cli("verify-fixtures --steps 1000" + out), 0);
    EXPECT_EQ(run_cli("verify-fixtures --steps 1000 --tamper-scale 1.01" + out), 3);
    EXPECT_EQ(run_cli("solve --problem " + (problems_dir / "stochastic.json").string() +
                      " --backend binomial --steps 40 --tol 1e-300 --max-iter 1" + out),
              2);
}

TEST(Binary, SimulateIsByteReproducible) {
    const auto a = scratch("repro_a");
    const auto b = scratch("repro_b");
    const std::string args = "simulate --problem " + (problems_dir / "stochastic.json").string() +
                             " --backend binomial --steps 60 --paths 2000 --seed 9 --out ";
    ASSERT_EQ(run_cli(args + a.string()), 0);
    ASSERT_EQ(run_cli(args + b.string()), 0);
    const auto text = slurp(a / "strategy.json");
    EXPECT_FALSE(text.empty());
    EXPECT_EQ(text, slurp(b / "strategy.json"));
}

}  // namespace
}  // namespace switching

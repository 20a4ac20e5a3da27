#include <gtest/gtest.h>

#include <cmath>

#include "switching/scheme.hpp"
#include "switching/verify.hpp"

namespace switching {
namespace {

Backend det(std::size_t n, double horizon = 1.0) { return Backend::deterministic(TimeGrid(horizon, n)); }

double max_abs(const FieldSurface& s) {
    double m = 0.0;
    for (double v : s.values()) m = std::max(m, std::abs(v));
    return m;
}

// State-dependent data on the lattice, terminal values compatible with the costs.
SwitchingProblem stochastic_problem() {
    auto p = zero_problem(1.0);
    p.drivers[Component::profit1] = AffineDriver{CoefficientFunction::constant(0.5), StateFeature::state, 0.2, 0.1};
    p.drivers[Component::profit2] = AffineDriver{CoefficientFunction::constant(0.3), StateFeature::none, -0.1, 0.0};
    p.drivers[Component::cost1] = AffineDriver{CoefficientFunction::constant(0.4), StateFeature::none, 0.3, 0.0};
    p.drivers[Component::cost2] = AffineDriver{CoefficientFunction::exponential(0.2, 1.0), StateFeature::state, 0.0, 0.2};
    p.switching_cost = {CoefficientFunction::constant(0.3), CoefficientFunction::polynomial({0.4, 0.1})};
    p.exit_cost = {CoefficientFunction::constant(0.2), CoefficientFunction::constant(0.2)};
    p.exit_benefit = {CoefficientFunction::constant(0.1), CoefficientFunction::exponential(0.1, -1.0)};
    return p;
}

TEST(InitializeScheme, CounterexampleProfitStart) {
    const auto b = det(1000);
    const auto start = initialize_scheme(counterexample_problem(1.0), b);
    double err = 0.0;
    for (std::size_t k = 0; k <= 1000; ++k)
        err = std::max(err, std::abs(start.zeroth.parts[Component::profit1].y.at(k, 0) - std::exp(1.0 - b.time(k))));
    EXPECT_LT(err, 2.0 * b.dt());
    EXPECT_LE(start.barrier_gap, 1e-10 + b.dt() * 10.0);
}

TEST(InitializeScheme, ZeroProblemIsZero) {
    const auto b = Backend::binomial(TimeGrid(1.0, 10));
    const auto start = initialize_scheme(zero_problem(1.0), b);
    for (Component c : all_components) EXPECT_EQ(max_abs(start.zeroth.parts[c].y), 0.0);
    EXPECT_EQ(max_abs(start.lower_barrier.y), 0.0);
}

TEST(InitializeScheme, LowerEnvelopeAtCounterexample) {
    const auto p = counterexample_problem(1.0);
    const LowerEnvelopeDriver alpha{{ShiftedProfitDriver{p.drivers[Component::profit1], p.exit_benefit[0]},
                                     ShiftedProfitDriver{p.drivers[Component::profit2], p.exit_benefit[1]}},
                                    {p.drivers[Component::cost1], p.drivers[Component::cost2]}};
    EXPECT_DOUBLE_EQ(alpha(0.0, 0.0, 1.0, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(p.drivers[Component::profit2](0.0, 0.0, 1.0, 0.0), 2.0);
}

TEST(InitializeScheme, RejectsInvalidProblem) {
    auto p = counterexample_problem(1.0);
    p.switching_cost[0] = CoefficientFunction::constant(0.0);
    try {
        (void)initialize_scheme(p, det(100));
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.report().failed_ids(), std::vector<std::string>{"A2"});
    }
    EXPECT_THROW((void)initialize_scheme(counterexample_problem(1.0), det(100, 2.0)), std::invalid_argument);
}

TEST(FirstIterate, ZeroProblemStaysZero) {
    const auto b = det(20);
    const auto p = zero_problem(1.0);
    const auto first = first_iterate(initialize_scheme(p, b), p, b);
    for (Component c : all_components) {
        EXPECT_EQ(max_abs(first.parts[c].y), 0.0);
        EXPECT_EQ(max_abs(first.parts[c].dk), 0.0);
    }
    const auto second = iterate_once(first, p, b);
    EXPECT_EQ(detail::sup_distance(first.parts, second.parts), 0.0);
}

TEST(FirstIterate, OrderedAgainstWarmStart) {
    for (auto kind : {BackendKind::deterministic, BackendKind::binomial}) {
        const auto b = Backend::make(kind, TimeGrid(1.0, 200));
        const auto p = kind == BackendKind::deterministic ? counterexample_problem(1.0) : stochastic_problem();
        const auto start = initialize_scheme(p, b);
        const auto first = first_iterate(start, p, b);
        for (int m = 1; m <= 2; ++m) {
            const auto plus = component(Side::profit, m);
            const auto minus = component(Side::cost, m);
            for (std::size_t i = 0; i < b.total_nodes(); ++i) {
                EXPECT_GE(first.parts[plus].y.values()[i], start.zeroth.parts[plus].y.values()[i] - 1e-12);
                EXPECT_GE(first.parts[minus].y.values()[i], start.lower_barrier.y.values()[i] - 1e-12);
            }
        }
    }
}

TEST(SolveSystem, ZeroProblemConvergesImmediately) {
    const auto [sol, trace] = solve_system(zero_problem(1.0), det(50));
    EXPECT_TRUE(trace.converged);
    EXPECT_LE(trace.iterations, 2U);
    for (Component c : all_components) EXPECT_EQ(max_abs(sol.y(c)), 0.0);
}

TEST(SolveSystem, CounterexampleTraceAtN512) {
    const auto b = det(512);
    const auto [sol, trace] = solve_system(counterexample_problem(1.0), b);
    ASSERT_TRUE(trace.converged) << to_string(trace.status);
    EXPECT_LE(trace.iterations, 200U);
    EXPECT_LT(trace.deltas.back(), 1e-8);
    for (std::size_t i = 1; i < trace.deltas.size(); ++i) EXPECT_LE(trace.deltas[i], trace.deltas[i - 1]);
    for (double d : trace.decreases) EXPECT_LE(d, 1e-10);
}

TEST(SolveSystem, FixedPointAndTerminalValues) {
    const auto b = det(400);
    const auto p = counterexample_problem(1.0);
    const auto [sol, trace] = solve_system(p, b);
    ASSERT_TRUE(trace.converged);
    Iterate it;
    it.index = 7;
    it.parts = sol.parts;
    it.obstacles = sol.obstacles;
    const auto again = iterate_once(it, p, b);
    EXPECT_LE(detail::sup_distance(again.parts, sol.parts), 1e-10);
    for (Component c : all_components) EXPECT_EQ(sol.y(c).at(400, 0), 1.0);
    EXPECT_LE(sol.max_constraint_violation, 1e-8);
    EXPECT_LE(sol.max_skorokhod_sum, 1e-8);
}

TEST(SolveSystem, MinimalAgainstClosedForms) {
    const auto b = det(1000);
    const auto [sol, trace] = solve_system(counterexample_problem(1.0), b);
    ASSERT_TRUE(trace.converged);
    const ClosedFormFamily f1{1, 1.0};
    for (Component c : all_components)
        for (std::size_t k = 0; k <= 1000; ++k) EXPECT_LE(sol.y(c).at(k, 0), f1.y(c, b.time(k)) + 1e-3);
    EXPECT_NEAR(sol.y0(Component::profit1), std::exp(1.0), 3e-3);
}

TEST(SolveSystem, RichardsonOrder) {
    auto y0 = [](std::size_t n) { return solve_system(counterexample_problem(1.0), det(n)).first.y0(Component::profit1); };
    const double a = y0(1000);
    const double b = y0(2000);
    const double c = y0(4000);
    EXPECT_LE(std::abs(a - b), 5.0 / 1000.0);
    EXPECT_GE(std::log2(std::abs(a - b) / std::abs(b - c)), 0.9);
}

TEST(SolveSystem, BoundsStableUnderRefinement) {
    const auto p = counterexample_problem(1.0);
    double prev_sup = 0.0;
    double prev_density = 0.0;
    for (std::size_t n : {250, 500, 1000}) {
        const auto b = det(n);
        const auto [sol, trace] = solve_system(p, b);
        double sup = 0.0;
        for (double s : trace.sup_norms) sup = std::max(sup, s);
        const double density = std::max(max_k_density(sol.parts[Component::cost1], b),
                                        max_k_density(sol.parts[Component::cost2], b));
        if (prev_sup > 0.0) {
            EXPECT_LE(sup / prev_sup, 1.5);
            EXPECT_LE(density / prev_density, 2.0);
        }
        prev_sup = sup;
        prev_density = density;
    }
}

TEST(SolveSystem, StochasticLatticeProblem) {
    const auto b = Backend::binomial(TimeGrid(1.0, 100));
    const auto [sol, trace] = solve_system(stochastic_problem(), b, SchemeOptions::defaults_for(b.kind()));
    ASSERT_TRUE(trace.converged) << to_string(trace.status);
    for (double d : trace.decreases) EXPECT_LE(d, 1e-10);
    EXPECT_LE(sol.max_constraint_violation, 1e-4);
    for (Component c : all_components) {
        const auto xi = terminal_values(b, sol.problem.terminal[c]);
        for (std::size_t j = 0; j <= 100; ++j) EXPECT_EQ(sol.y(c).at(100, j), xi[j]);
    }
}

TEST(SolveSystem, MaxIterationsReported) {
    SchemeOptions o;
    o.tol = 1e-300;
    o.max_iter = 2;
    const auto [sol, trace] = solve_system(stochastic_problem(), Backend::binomial(TimeGrid(1.0, 40)), o);
    EXPECT_FALSE(trace.converged);
    EXPECT_EQ(trace.iterations, 2U);
    EXPECT_EQ(trace.status, SchemeStatus::max_iterations);
    EXPECT_THROW((void)solve_system(zero_problem(1.0), det(10), SchemeOptions{0.0, 5, 1e-10}), std::invalid_argument);
}

}  // namespace
}  // namespace switching

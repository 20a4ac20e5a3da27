#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "switching/grid.hpp"
#include "switching/model.hpp"
#include "switching/rbsde.hpp"

namespace switching {

/// Thrown when the problem data fail validation; carries the full report.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(ValidationReport report)
        : std::runtime_error("assumption validation failed:\n" + report.summary()), report_(std::move(report)) {}

    [[nodiscard]] const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

/// Profit driver rewritten for L^i = Y^{+,i,0} + b_i:
/// ψ_i(t, x, ℓ, z) = ψ_i^+(t, x, ℓ − b_i(t), z) − b_i'(t).
struct ShiftedProfitDriver {
    AffineDriver profit;
    CoefficientFunction benefit;

    [[nodiscard]] double operator()(double t, double x, double y, double z) const {
        return profit(t, x, y - benefit(t), z) - benefit.derivative(t);
    }
    [[nodiscard]] double lipschitz_y() const { return profit.lipschitz_y(); }
    [[nodiscard]] double lipschitz_z() const { return profit.lipschitz_z(); }
};

/// α = ψ_1 ∧ ψ_2 ∧ ψ_1^- ∧ ψ_2^-, the generator of the lower barrier process.
struct LowerEnvelopeDriver {
    std::array<ShiftedProfitDriver, 2> shifted;
    std::array<AffineDriver, 2> cost;

    [[nodiscard]] double operator()(double t, double x, double y, double z) const {
        return std::min({shifted[0](t, x, y, z), shifted[1](t, x, y, z), cost[0](t, x, y, z), cost[1](t, x, y, z)});
    }
    [[nodiscard]] double lipschitz_y() const {
        return std::max({shifted[0].lipschitz_y(), shifted[1].lipschitz_y(), cost[0].lipschitz_y(), cost[1].lipschitz_y()});
    }
    [[nodiscard]] double lipschitz_z() const {
        return std::max({shifted[0].lipschitz_z(), shifted[1].lipschitz_z(), cost[0].lipschitz_z(), cost[1].lipschitz_z()});
    }
};

/// One stage of the monotone scheme.
struct Iterate {
    std::size_t index = 0;
    PerComponent<RbsdeSolution> parts;
    /// Obstacle each component was reflected on (±∞ where unconstrained).
    PerComponent<FieldSurface> obstacles;
};

/// Output of the warm start.
struct SchemeStart {
    /// Profit slots hold Y^{+,i,0}; cost slots hold the lower barrier Ẏ, which
    /// lies below every Y^{-,i,1}.
    Iterate zeroth;
    RbsdeSolution lower_barrier;           ///< Ẏ
    std::array<FieldSurface, 2> shifted;   ///< L^i = Y^{+,i,0} + b_i
    double barrier_gap = 0.0;              ///< max of Ẏ − (L^i ∧ (Ẏ + ℓ_i)), ≤ tolerance
};

enum class SchemeStatus { converged, max_iterations, monotonicity_failure, constraint_failure };

[[nodiscard]] inline std::string to_string(SchemeStatus s) {
    switch (s) {
    case SchemeStatus::converged: return "converged";
    case SchemeStatus::max_iterations: return "max_iterations";
    case SchemeStatus::monotonicity_failure: return "monotonicity_failure";
    case SchemeStatus::constraint_failure: return "constraint_failure";
    }
    return "unknown";
}

struct ConvergenceTrace {
    /// deltas[m] = sup-distance between stage m+1 and stage m+2 (first entry compares stages 1 and 2).
    std::vector<double> deltas;
    /// Largest pointwise decrease from one stage to the next, starting with stage 0 → 1.
    std::vector<double> decreases;
    /// sup|Y| over all components, per stage starting at stage 0.
    std::vector<double> sup_norms;
    std::size_t iterations = 0;
    bool converged = false;
    SchemeStatus status = SchemeStatus::max_iterations;
};

struct SchemeOptions {
    double tol = 1e-8;
    std::size_t max_iter = 500;
    /// Pointwise decrease between stages tolerated before the run is flagged.
    double monotonicity_slack = 1e-10;

    [[nodiscard]] static SchemeOptions defaults_for(BackendKind kind) {
        SchemeOptions o;
        o.tol = kind == BackendKind::deterministic ? 1e-8 : 1e-4;
        return o;
    }
};

/// Converged system with the obstacles recomputed from its own Y surfaces.
struct BalanceSheetSolution {
    SwitchingProblem problem;
    Backend backend;
    PerComponent<RbsdeSolution> parts;
    PerComponent<FieldSurface> obstacles;
    std::size_t iterations = 0;
    bool converged = false;
    double max_constraint_violation = 0.0;
    double max_skorokhod_sum = 0.0;

    [[nodiscard]] double y0(Component c) const { return parts[c].y.at(0, 0); }
    [[nodiscard]] const FieldSurface& y(Component c) const { return parts[c].y; }
};

namespace detail {

[[nodiscard]] inline Reflection reflection_of(Component c) {
    return side_of(c) == Side::profit ? Reflection::lower : Reflection::upper;
}

/// Obstacle surface for component c, taking Y^{+,·} from `profit` and Y^{−,·} from `cost`.
[[nodiscard]] inline FieldSurface obstacle_surface(Component c, const PerComponent<RbsdeSolution>& profit,
                                                   const PerComponent<RbsdeSolution>& cost,
                                                   const SwitchingProblem& problem, const Backend& backend) {
    FieldSurface s(backend);
    for (std::size_t k = 0; k <= backend.steps(); ++k) {
        const auto costs = CostValues::at(problem, backend.time(k));
        for (std::size_t j = 0; j < backend.nodes(k); ++j) {
            PerComponent<double> y;
            for (int m = 1; m <= 2; ++m) {
                y[component(Side::profit, m)] = profit[component(Side::profit, m)].y.at(k, j);
                y[component(Side::cost, m)] = cost[component(Side::cost, m)].y.at(k, j);
            }
            s.at(k, j) = evaluate_obstacles(y, costs)[c];
        }
    }
    return s;
}

/// Terminal values of a cost component, clipped onto the obstacle at T when the
/// previous stage's terminal layer leaves no room (only the first
/// cost-side update can need this: stage-1 cost terminals are Ẏ_T, not ξ^-).
[[nodiscard]] inline std::vector<double> fitted_terminal(Component c, const SwitchingProblem& problem,
                                                         const FieldSurface& obstacle, const Backend& backend) {
    auto xi = terminal_values(backend, problem.terminal[c]);
    const std::size_t n = backend.steps();
    for (std::size_t j = 0; j < xi.size(); ++j) {
        const double s = obstacle.at(n, j);
        xi[j] = side_of(c) == Side::profit ? std::max(xi[j], s) : std::min(xi[j], s);
    }
    return xi;
}

inline void check_backend(const SwitchingProblem& problem, const Backend& backend) {
    if (std::abs(problem.horizon - backend.grid().horizon()) > 1e-12 * std::max(1.0, problem.horizon))
        throw std::invalid_argument("backend horizon does not match the problem horizon");
}

[[nodiscard]] inline double sup_distance(const PerComponent<RbsdeSolution>& a, const PerComponent<RbsdeSolution>& b) {
    double d = 0.0;
    for (Component c : all_components) {
        const auto va = a[c].y.values();
        const auto vb = b[c].y.values();
        for (std::size_t i = 0; i < va.size(); ++i) d = std::max(d, std::abs(va[i] - vb[i]));
    }
    return d;
}

[[nodiscard]] inline double max_decrease(const PerComponent<RbsdeSolution>& before,
                                         const PerComponent<RbsdeSolution>& after) {
    double d = 0.0;
    for (Component c : all_components) {
        const auto va = before[c].y.values();
        const auto vb = after[c].y.values();
        for (std::size_t i = 0; i < va.size(); ++i) d = std::max(d, va[i] - vb[i]);
    }
    return d;
}

[[nodiscard]] inline double sup_norm(const PerComponent<RbsdeSolution>& a) {
    double d = 0.0;
    for (Component c : all_components)
        for (double v : a[c].y.values()) d = std::max(d, std::abs(v));
    return d;
}

}  // namespace detail

/// Warm start: plain BSDEs for the profit sides and the lower barrier Ẏ.
///
/// Throws ValidationError if the problem fails validation and
/// std::runtime_error if Ẏ does not sit below L^i ∧ (Ẏ + ℓ_i).
[[nodiscard]] inline SchemeStart initialize_scheme(const SwitchingProblem& problem, const Backend& backend) {
    detail::check_backend(problem, backend);
    auto report = validate_assumptions(problem, backend);
    if (!report.all_passed()) throw ValidationError(std::move(report));

    SchemeStart start;
    start.zeroth.index = 0;
    for (int m = 1; m <= 2; ++m) {
        const Component c = component(Side::profit, m);
        start.zeroth.parts[c] = solve_bsde(problem.drivers[c], terminal_values(backend, problem.terminal[c]), backend);
        start.zeroth.obstacles[c] = FieldSurface(backend, -infinity);

        FieldSurface shifted(backend);
        for (std::size_t k = 0; k <= backend.steps(); ++k)
            for (std::size_t j = 0; j < backend.nodes(k); ++j)
                shifted.at(k, j) = start.zeroth.parts[c].y.at(k, j) + problem.exit_gain(m, backend.time(k));
        start.shifted[m - 1] = std::move(shifted);
    }

    LowerEnvelopeDriver alpha{
        {ShiftedProfitDriver{problem.drivers[Component::profit1], problem.exit_benefit[0]},
         ShiftedProfitDriver{problem.drivers[Component::profit2], problem.exit_benefit[1]}},
        {problem.drivers[Component::cost1], problem.drivers[Component::cost2]}};

    const std::size_t n = backend.steps();
    std::vector<double> barrier_terminal(backend.nodes(n));
    for (std::size_t j = 0; j < barrier_terminal.size(); ++j) {
        const double x = backend.state(n, j);
        barrier_terminal[j] = std::min({problem.terminal[Component::profit1](x) + problem.exit_gain(1, problem.horizon),
                                        problem.terminal[Component::profit2](x) + problem.exit_gain(2, problem.horizon),
                                        problem.terminal[Component::cost1](x), problem.terminal[Component::cost2](x)});
    }
    start.lower_barrier = solve_bsde(alpha, barrier_terminal, backend);

    // Ẏ ≤ L^i holds exactly in continuous time; on the grid the b-shift commutes
    // with the explicit step only up to O(Δt²) per step.
    double gap = -infinity;
    double scale = 1.0;
    for (std::size_t k = 0; k <= n; ++k) {
        for (std::size_t j = 0; j < backend.nodes(k); ++j) {
            const double dy = start.lower_barrier.y.at(k, j);
            for (int m = 1; m <= 2; ++m) {
                const double bound = std::min(start.shifted[m - 1].at(k, j), dy + problem.switching(m, backend.time(k)));
                gap = std::max(gap, dy - bound);
                scale = std::max(scale, std::abs(start.shifted[m - 1].at(k, j)));
            }
        }
    }
    start.barrier_gap = gap;
    const double allowed = 1e-10 * scale + backend.dt() * scale;
    if (gap > allowed) {
        throw std::runtime_error("lower barrier exceeds L^i ^ (Ydot + l_i) by " + std::to_string(gap) +
                                 " (allowed " + std::to_string(allowed) + ")");
    }

    for (int m = 1; m <= 2; ++m) {
        const Component c = component(Side::cost, m);
        start.zeroth.parts[c] = start.lower_barrier;
        start.zeroth.obstacles[c] = FieldSurface(backend, infinity);
    }
    return start;
}

/// Stage 1: cost sides reflected below (Y^{+,i,0} + b_i) ∧ (Ẏ + ℓ_i) with
/// terminal Ẏ_T, then profit sides reflected above (Y^{+,j,0} − ℓ_i) ∨ (Y^{−,i,1} − a_i).
[[nodiscard]] inline Iterate first_iterate(const SchemeStart& start, const SwitchingProblem& problem,
                                           const Backend& backend) {
    Iterate next;
    next.index = 1;
    const auto& dot_y = start.lower_barrier;
    for (int m = 1; m <= 2; ++m) {
        const Component c = component(Side::cost, m);
        FieldSurface obstacle(backend);
        for (std::size_t k = 0; k <= backend.steps(); ++k)
            for (std::size_t j = 0; j < backend.nodes(k); ++j)
                obstacle.at(k, j) = std::min(start.shifted[m - 1].at(k, j),
                                             dot_y.y.at(k, j) + problem.switching(m, backend.time(k)));
        const auto terminal = std::vector<double>(dot_y.y.step(backend.steps()).begin(), dot_y.y.step(backend.steps()).end());
        next.parts[c] = solve_rbsde_upper(problem.drivers[c], terminal, obstacle, backend);
        next.obstacles[c] = std::move(obstacle);
    }
    for (int m = 1; m <= 2; ++m) {
        const Component c = component(Side::profit, m);
        auto obstacle = detail::obstacle_surface(c, start.zeroth.parts, next.parts, problem, backend);
        next.parts[c] = solve_rbsde_lower(problem.drivers[c], terminal_values(backend, problem.terminal[c]), obstacle, backend);
        next.obstacles[c] = std::move(obstacle);
    }
    return next;
}

/// Stage n → n+1. Both cost sides first, with obstacles from stage n; then
/// both profit sides, whose obstacles take Y^{+,j} from stage n and Y^{−,i}
/// from stage n+1. The order is load-bearing.
[[nodiscard]] inline Iterate iterate_once(const Iterate& prev, const SwitchingProblem& problem, const Backend& backend) {
    Iterate next;
    next.index = prev.index + 1;
    for (int m = 1; m <= 2; ++m) {
        const Component c = component(Side::cost, m);
        auto obstacle = detail::obstacle_surface(c, prev.parts, prev.parts, problem, backend);
        const auto terminal = detail::fitted_terminal(c, problem, obstacle, backend);
        next.parts[c] = solve_rbsde_upper(problem.drivers[c], terminal, obstacle, backend);
        next.obstacles[c] = std::move(obstacle);
    }
    for (int m = 1; m <= 2; ++m) {
        const Component c = component(Side::profit, m);
        auto obstacle = detail::obstacle_surface(c, prev.parts, next.parts, problem, backend);
        next.parts[c] = solve_rbsde_lower(problem.drivers[c], terminal_values(backend, problem.terminal[c]), obstacle, backend);
        next.obstacles[c] = std::move(obstacle);
    }
    return next;
}

/// Max over components and nodes of the amount by which Y falls outside its
/// recomputed obstacle, and the largest Skorokhod sum against that obstacle.
[[nodiscard]] inline std::pair<double, double> constraint_residuals(const PerComponent<RbsdeSolution>& parts,
                                                                    const PerComponent<FieldSurface>& obstacles) {
    double violation = 0.0;
    double skorokhod = 0.0;
    for (Component c : all_components) {
        const auto y = parts[c].y.values();
        const auto s = obstacles[c].values();
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double v = side_of(c) == Side::profit ? s[i] - y[i] : y[i] - s[i];
            violation = std::max(violation, v);
        }
        skorokhod = std::max(skorokhod, skorokhod_sum(parts[c], obstacles[c], detail::reflection_of(c)));
    }
    return {violation, skorokhod};
}

/// Runs the monotone scheme until the sup-distance between stages drops below
/// `options.tol` or `options.max_iter` stage updates have been made.
[[nodiscard]] inline std::pair<BalanceSheetSolution, ConvergenceTrace> solve_system(const SwitchingProblem& problem,
                                                                                   const Backend& backend,
                                                                                   const SchemeOptions& options = {}) {
    if (!(options.tol > 0.0)) throw std::invalid_argument("tol must be positive");
    if (options.max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");

    ConvergenceTrace trace;
    const auto start = initialize_scheme(problem, backend);
    Iterate current = first_iterate(start, problem, backend);
    trace.sup_norms.push_back(detail::sup_norm(start.zeroth.parts));
    trace.sup_norms.push_back(detail::sup_norm(current.parts));
    trace.decreases.push_back(detail::max_decrease(start.zeroth.parts, current.parts));

    trace.status = SchemeStatus::max_iterations;
    if (trace.decreases.back() > options.monotonicity_slack) trace.status = SchemeStatus::monotonicity_failure;

    while (trace.status != SchemeStatus::monotonicity_failure && trace.iterations < options.max_iter) {
        Iterate next = iterate_once(current, problem, backend);
        ++trace.iterations;
        const double delta = detail::sup_distance(current.parts, next.parts);
        trace.deltas.push_back(delta);
        trace.decreases.push_back(detail::max_decrease(current.parts, next.parts));
        trace.sup_norms.push_back(detail::sup_norm(next.parts));
        current = std::move(next);
        if (trace.decreases.back() > options.monotonicity_slack) {
            trace.status = SchemeStatus::monotonicity_failure;
        } else if (delta < options.tol) {
            trace.status = SchemeStatus::converged;
            break;
        }
    }

    BalanceSheetSolution sol{problem, backend, current.parts, {}, trace.iterations, false, 0.0, 0.0};
    for (Component c : all_components)
        sol.obstacles[c] = detail::obstacle_surface(c, sol.parts, sol.parts, problem, backend);
    std::tie(sol.max_constraint_violation, sol.max_skorokhod_sum) = constraint_residuals(sol.parts, sol.obstacles);

    if (trace.status == SchemeStatus::converged) {
        double total_k = 0.0;
        for (Component c : all_components)
            for (double v : sol.parts[c].dk.values()) total_k += v;
        const double slack = std::max(1e-8, options.tol);
        // Obstacles were frozen one stage behind; at convergence they move by less than tol.
        if (sol.max_constraint_violation > slack || sol.max_skorokhod_sum > slack * (1.0 + total_k))
            trace.status = SchemeStatus::constraint_failure;
    }
    trace.converged = trace.status == SchemeStatus::converged;
    sol.converged = trace.converged;
    return {std::move(sol), std::move(trace)};
}

}  // namespace switching

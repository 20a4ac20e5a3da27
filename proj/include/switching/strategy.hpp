#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "switching/grid.hpp"
#include "switching/model.hpp"
#include "switching/rbsde.hpp"
#include "switching/scheme.hpp"

namespace switching {

enum class Action { switch_mode, terminate, hold_to_horizon };

[[nodiscard]] inline std::string to_string(Action a) {
    switch (a) {
    case Action::switch_mode: return "switch";
    case Action::terminate: return "terminate";
    case Action::hold_to_horizon: return "hold-to-horizon";
    }
    return "unknown";
}

/// True where Y^c touches its obstacle at (step, node).
[[nodiscard]] inline bool in_contact(const BalanceSheetSolution& sol, Component c, std::size_t step, std::size_t node) {
    const double s = sol.obstacles[c].at(step, node);
    return std::abs(sol.parts[c].y.at(step, node) - s) <= contact_tolerance(sol.backend, s);
}

/// First k ≥ from_step along `path` where each component touches its
/// obstacle, capped at N.
[[nodiscard]] inline PerComponent<std::size_t> extract_stopping_times(const BalanceSheetSolution& sol,
                                                                      const LatticePath& path, std::size_t from_step) {
    const std::size_t n = sol.backend.steps();
    if (path.size() != n + 1) throw std::invalid_argument("path length does not match the grid");
    if (from_step > n) throw std::out_of_range("from_step beyond the horizon");
    PerComponent<std::size_t> out;
    for (Component c : all_components) {
        std::size_t stop = n;
        for (std::size_t k = from_step; k < n; ++k) {
            if (in_contact(sol, c, k, path[k])) {
                stop = k;
                break;
            }
        }
        out[c] = stop;
    }
    return out;
}

/// Deterministic-backend form: the single trivial path.
[[nodiscard]] inline PerComponent<std::size_t> extract_stopping_times(const BalanceSheetSolution& sol,
                                                                      std::size_t from_step) {
    return extract_stopping_times(sol, LatticePath(sol.backend.steps() + 1, 0), from_step);
}

/// Which branch of the obstacle is active at a contact point. Equal branches
/// resolve to a switch.
[[nodiscard]] inline Action classify_action(const BalanceSheetSolution& sol, Component c, std::size_t node,
                                            std::size_t step) {
    if (!in_contact(sol, c, step, node))
        throw std::invalid_argument("classify_action: " + to_string(c) + " is not at its obstacle at step " +
                                    std::to_string(step) + ", node " + std::to_string(node));
    const int i = mode_of(c);
    const int j = other_mode(i);
    const double t = sol.backend.time(step);
    const auto& p = sol.problem;
    if (side_of(c) == Side::profit) {
        const double to_switch = sol.y(component(Side::profit, j)).at(step, node) - p.switching(i, t);
        const double to_exit = sol.y(component(Side::cost, i)).at(step, node) - p.exit_loss(i, t);
        return to_switch >= to_exit ? Action::switch_mode : Action::terminate;
    }
    const double to_switch = sol.y(component(Side::cost, j)).at(step, node) + p.switching(i, t);
    const double to_exit = sol.y(component(Side::profit, i)).at(step, node) + p.exit_gain(i, t);
    return to_switch <= to_exit ? Action::switch_mode : Action::terminate;
}

/// First-action outcome of one side of the balance sheet.
struct SideOutcome {
    Component component = Component::profit1;
    double realized = 0.0;        ///< mean realized yield (profit) or cost (cost side)
    double std_error = 0.0;       ///< Monte Carlo standard error of `realized`
    double value = 0.0;           ///< Y_0 of the component
    double gap = 0.0;             ///< |realized − value|
    double mean_stop_step = 0.0;
    std::size_t first_stop_step = 0;  ///< stopping step on the first path
    Action first_action = Action::hold_to_horizon;
    std::array<std::size_t, 3> action_counts{};  ///< indexed by Action
};

struct StrategyReport {
    int start_mode = 1;
    std::size_t n_paths = 1;
    std::uint64_t seed = 0;
    std::size_t steps = 0;
    BackendKind backend = BackendKind::deterministic;
    SideOutcome profit;
    SideOutcome cost;
};

namespace detail {

struct PathOutcome {
    double value = 0.0;
    std::size_t stop = 0;
    Action action = Action::hold_to_horizon;
};

/// Left-endpoint running integral up to the stopping step plus the payoff
/// there: the obstacle before T, the terminal value at T. The driver is
/// evaluated at (E_k[Y_{k+1}], Z_k), as in the solver.
[[nodiscard]] inline PathOutcome follow_path(const BalanceSheetSolution& sol, Component c, const LatticePath& path,
                                             std::size_t stop) {
    const auto& backend = sol.backend;
    const auto& y = sol.parts[c].y;
    const auto& z = sol.parts[c].z;
    const auto& driver = sol.problem.drivers[c];
    const double dt = backend.dt();
    const std::size_t n = backend.steps();
    PathOutcome out;
    out.stop = stop;
    double acc = 0.0;
    for (std::size_t k = 0; k < stop; ++k) {
        const std::size_t j = path[k];
        const double mean = backend.kind() == BackendKind::deterministic ? y.at(k + 1, 0)
                                                                         : 0.5 * (y.at(k + 1, j) + y.at(k + 1, j + 1));
        acc += driver(backend.time(k), backend.state(k, j), mean, z.at(k, j)) * dt;
    }
    if (stop < n) {
        acc += sol.obstacles[c].at(stop, path[stop]);
        out.action = classify_action(sol, c, path[stop], stop);
    } else {
        acc += sol.problem.terminal[c](backend.state(n, path[n]));
        out.action = Action::hold_to_horizon;
    }
    out.value = acc;
    return out;
}

}  // namespace detail

/// Follows the extracted stopping rule from t = 0 in `start_mode` along
/// sampled paths and compares the realized first-action value with Y_0.
[[nodiscard]] inline StrategyReport simulate_policy(const BalanceSheetSolution& sol, std::size_t n_paths,
                                                    std::uint64_t seed, int start_mode) {
    if (start_mode != 1 && start_mode != 2) throw std::invalid_argument("start mode must be 1 or 2");
    if (n_paths < 1) throw std::invalid_argument("need at least one path");
    const bool deterministic = sol.backend.kind() == BackendKind::deterministic;
    const std::size_t paths = deterministic ? 1 : n_paths;

    StrategyReport report;
    report.start_mode = start_mode;
    report.n_paths = paths;
    report.seed = seed;
    report.steps = sol.backend.steps();
    report.backend = sol.backend.kind();

    const std::array<Component, 2> sides{component(Side::profit, start_mode), component(Side::cost, start_mode)};
    std::array<double, 2> sum{}, sum_sq{}, stop_sum{};
    std::array<SideOutcome, 2> outcome;
    for (std::size_t s = 0; s < 2; ++s) outcome[s].component = sides[s];

    for (std::size_t p = 0; p < paths; ++p) {
        const auto path = sample_path(sol.backend, seed, p);
        const auto stops = extract_stopping_times(sol, path, 0);
        for (std::size_t s = 0; s < 2; ++s) {
            const auto r = detail::follow_path(sol, sides[s], path, stops[sides[s]]);
            sum[s] += r.value;
            sum_sq[s] += r.value * r.value;
            stop_sum[s] += static_cast<double>(r.stop);
            ++outcome[s].action_counts[static_cast<std::size_t>(r.action)];
            if (p == 0) {
                outcome[s].first_stop_step = r.stop;
                outcome[s].first_action = r.action;
            }
        }
    }

    const double np = static_cast<double>(paths);
    for (std::size_t s = 0; s < 2; ++s) {
        auto& o = outcome[s];
        o.realized = sum[s] / np;
        const double var = paths > 1 ? std::max(0.0, (sum_sq[s] - np * o.realized * o.realized) / (np - 1.0)) : 0.0;
        o.std_error = std::sqrt(var / np);
        o.value = sol.y0(sides[s]);
        o.gap = std::abs(o.realized - o.value);
        o.mean_stop_step = stop_sum[s] / np;
    }
    report.profit = outcome[0];
    report.cost = outcome[1];
    return report;
}

}  // namespace switching

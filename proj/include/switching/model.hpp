#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "switching/coefficient.hpp"
#include "switching/grid.hpp"

namespace switching {

enum class Side { profit, cost };

/// The four value processes of the balance sheet, in storage order.
enum class Component : std::size_t { profit1 = 0, profit2 = 1, cost1 = 2, cost2 = 3 };

inline constexpr std::array<Component, 4> all_components{Component::profit1, Component::profit2, Component::cost1,
                                                         Component::cost2};

[[nodiscard]] constexpr std::size_t index(Component c) { return static_cast<std::size_t>(c); }
[[nodiscard]] constexpr Side side_of(Component c) { return index(c) < 2 ? Side::profit : Side::cost; }
/// Mode as 1 or 2.
[[nodiscard]] constexpr int mode_of(Component c) { return static_cast<int>(index(c) % 2) + 1; }
[[nodiscard]] constexpr Component component(Side side, int mode) {
    return static_cast<Component>((side == Side::profit ? 0 : 2) + (mode - 1));
}
[[nodiscard]] constexpr int other_mode(int mode) { return 3 - mode; }

[[nodiscard]] inline std::string to_string(Side side) { return side == Side::profit ? "profit" : "cost"; }
[[nodiscard]] inline std::string to_string(Component c) {
    return (side_of(c) == Side::profit ? "plus_" : "minus_") + std::to_string(mode_of(c));
}

/// Fixed-size map keyed by Component.
template <class T>
struct PerComponent {
    std::array<T, 4> items;

    T& operator[](Component c) { return items[index(c)]; }
    const T& operator[](Component c) const { return items[index(c)]; }
};

/// Anything usable as a BSDE generator ψ(t, x, y, z).
///
/// Lipschitz constants in y and z are needed by the explicit-scheme guard.
template <class D>
concept Driver = requires(const D& d, double t, double x, double y, double z) {
    { d(t, x, y, z) } -> std::convertible_to<double>;
    { d.lipschitz_y() } -> std::convertible_to<double>;
    { d.lipschitz_z() } -> std::convertible_to<double>;
};

enum class StateFeature { none, state };

/// ψ(t, x, y, z) = c₀(t)·φ(x) + c₁·y + c₂·z with φ(x) ∈ {1, x}.
struct AffineDriver {
    CoefficientFunction intercept;
    StateFeature feature = StateFeature::none;
    double y_coef = 0.0;
    double z_coef = 0.0;

    [[nodiscard]] double operator()(double t, double x, double y, double z) const {
        const double base = intercept(t) * (feature == StateFeature::state ? x : 1.0);
        return base + y_coef * y + z_coef * z;
    }
    [[nodiscard]] double lipschitz_y() const { return std::abs(y_coef); }
    [[nodiscard]] double lipschitz_z() const { return std::abs(z_coef); }
    [[nodiscard]] double lipschitz() const { return lipschitz_y() + lipschitz_z(); }
};

/// Terminal value as a function of the terminal state: intercept + slope·x.
struct StateFunction {
    double intercept = 0.0;
    double slope = 0.0;

    [[nodiscard]] double operator()(double x) const { return intercept + slope * x; }
};

/// Data of the two-mode full-balance-sheet switching problem.
struct SwitchingProblem {
    double horizon = 1.0;
    PerComponent<AffineDriver> drivers;
    /// ℓ_i: cost of switching out of mode i.
    std::array<CoefficientFunction, 2> switching_cost;
    /// a_i: cost of terminating from mode i, charged on the profit side.
    std::array<CoefficientFunction, 2> exit_cost;
    /// b_i: benefit of terminating from mode i, credited on the cost side.
    std::array<CoefficientFunction, 2> exit_benefit;
    PerComponent<StateFunction> terminal;

    [[nodiscard]] double switching(int mode, double t) const { return switching_cost[mode - 1](t); }
    [[nodiscard]] double exit_loss(int mode, double t) const { return exit_cost[mode - 1](t); }
    [[nodiscard]] double exit_gain(int mode, double t) const { return exit_benefit[mode - 1](t); }
};

/// ℓ, a, b evaluated at one time.
struct CostValues {
    std::array<double, 2> switching{};
    std::array<double, 2> exit_cost{};
    std::array<double, 2> exit_benefit{};

    [[nodiscard]] static CostValues at(const SwitchingProblem& p, double t) {
        CostValues v;
        for (int m = 1; m <= 2; ++m) {
            v.switching[m - 1] = p.switching(m, t);
            v.exit_cost[m - 1] = p.exit_loss(m, t);
            v.exit_benefit[m - 1] = p.exit_gain(m, t);
        }
        return v;
    }
};

using ObstacleQuadruple = PerComponent<double>;

/// The interconnected obstacles at one node:
///   S^{+,i} = (Y^{+,j} − ℓ_i) ∨ (Y^{−,i} − a_i)
///   S^{−,i} = (Y^{−,j} + ℓ_i) ∧ (Y^{+,i} + b_i),  j ≠ i.
[[nodiscard]] inline ObstacleQuadruple evaluate_obstacles(const PerComponent<double>& y, const CostValues& c) {
    ObstacleQuadruple s;
    for (int i = 1; i <= 2; ++i) {
        const int j = other_mode(i);
        s[component(Side::profit, i)] = std::max(y[component(Side::profit, j)] - c.switching[i - 1],
                                                 y[component(Side::cost, i)] - c.exit_cost[i - 1]);
        s[component(Side::cost, i)] = std::min(y[component(Side::cost, j)] + c.switching[i - 1],
                                               y[component(Side::profit, i)] + c.exit_benefit[i - 1]);
    }
    return s;
}

/// Absolute slack on the terminal compatibility inequalities.
inline constexpr double terminal_slack = 1e-12;

struct AssumptionCheck {
    AssumptionCheck() = default;
    AssumptionCheck(std::string id_, std::string description_) : id(std::move(id_)), description(std::move(description_)) {}

    std::string id;           ///< "A1", "A2", "A3", "BC1".."BC4", "A4", "step"
    std::string description;
    bool passed = true;
    std::optional<double> first_time;   ///< first violating time, if any
    std::optional<double> first_value;  ///< offending value at that time
    std::string detail;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;

    [[nodiscard]] bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }
    [[nodiscard]] const AssumptionCheck* find(const std::string& id) const {
        for (const auto& c : checks)
            if (c.id == id) return &c;
        return nullptr;
    }
    [[nodiscard]] std::vector<std::string> failed_ids() const {
        std::vector<std::string> ids;
        for (const auto& c : checks)
            if (!c.passed) ids.push_back(c.id);
        return ids;
    }
    [[nodiscard]] std::string summary() const {
        std::ostringstream os;
        for (const auto& c : checks) {
            os << (c.passed ? "pass " : "FAIL ") << c.id << ": " << c.description;
            if (!c.passed && !c.detail.empty()) os << " (" << c.detail << ")";
            os << '\n';
        }
        return os.str();
    }
};

/// Largest Δt for which the explicit step y + ψ(y, z)Δt is monotone in the
/// successor values and satisfies Δt·L < 1/2.
[[nodiscard]] inline bool explicit_step_admissible(double lip_y, double lip_z, const Backend& backend) {
    const double dt = backend.dt();
    if (!(dt * (lip_y + lip_z) < 0.5)) return false;
    if (backend.kind() == BackendKind::binomial && lip_z * std::sqrt(dt) > 1.0 - lip_y * dt) return false;
    return true;
}

namespace detail {

inline void record_first(AssumptionCheck& check, double t, double value, const std::string& what) {
    if (!check.passed) return;
    check.passed = false;
    check.first_time = t;
    check.first_value = value;
    check.detail = what;
}

}  // namespace detail

/// Checks the standing assumptions on the problem data over the grid of
/// `backend`. Never throws on bad data; every failure is reported.
[[nodiscard]] inline ValidationReport validate_assumptions(const SwitchingProblem& problem, const Backend& backend) {
    ValidationReport report;
    const std::size_t n = backend.steps();

    AssumptionCheck lipschitz{"A1", "drivers Lipschitz in (y,z); psi(t,x,0,0) finite on the grid"};
    for (Component c : all_components) {
        const auto& d = problem.drivers[c];
        if (!std::isfinite(d.y_coef) || !std::isfinite(d.z_coef)) {
            detail::record_first(lipschitz, 0.0, d.y_coef + d.z_coef, "driver " + to_string(c) + " has non-finite coefficients");
        }
        for (std::size_t k = 0; k <= n && lipschitz.passed; ++k) {
            for (std::size_t j = 0; j < backend.nodes(k); ++j) {
                const double v = d(backend.time(k), backend.state(k, j), 0.0, 0.0);
                if (!std::isfinite(v)) {
                    detail::record_first(lipschitz, backend.time(k), v, "driver " + to_string(c) + " not finite");
                    break;
                }
            }
        }
    }
    report.checks.push_back(lipschitz);

    AssumptionCheck positivity{"A2", "switching costs l_i(t) > 0 and a_i, b_i, l_i finite at every grid time"};
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = backend.time(k);
        for (int m = 1; m <= 2; ++m) {
            const double l = problem.switching(m, t);
            if (!(l > 0.0))
                detail::record_first(positivity, t, l, "l_" + std::to_string(m) + " not strictly positive");
            if (!std::isfinite(problem.exit_loss(m, t)) || !std::isfinite(problem.exit_gain(m, t)))
                detail::record_first(positivity, t, problem.exit_loss(m, t), "a_" + std::to_string(m) + " or b_" +
                                                                                 std::to_string(m) + " not finite");
        }
    }
    report.checks.push_back(positivity);

    AssumptionCheck integrable{"A3", "terminal values finite"};
    for (Component c : all_components)
        for (std::size_t j = 0; j < backend.nodes(n); ++j) {
            const double v = problem.terminal[c](backend.state(n, j));
            if (!std::isfinite(v)) detail::record_first(integrable, backend.time(n), v, "terminal " + to_string(c));
        }
    report.checks.push_back(integrable);

    // Terminal compatibility, one inequality per component, checked at every terminal node.
    const double horizon = backend.time(n);
    const auto costs = CostValues::at(problem, horizon);
    const std::array<const char*, 4> bc_text{
        "xi1+ >= (xi2+ - l1(T)) v (xi1- - a1(T))", "xi2+ >= (xi1+ - l2(T)) v (xi2- - a2(T))",
        "xi1- <= (xi2- + l1(T)) ^ (xi1+ + b1(T))", "xi2- <= (xi1- + l2(T)) ^ (xi2+ + b2(T))"};
    const std::array<Component, 4> bc_order{Component::profit1, Component::profit2, Component::cost1, Component::cost2};
    for (std::size_t line = 0; line < 4; ++line) {
        const Component c = bc_order[line];
        AssumptionCheck bc{"BC" + std::to_string(line + 1), bc_text[line]};
        for (std::size_t j = 0; j < backend.nodes(n); ++j) {
            PerComponent<double> xi;
            for (Component d : all_components) xi[d] = problem.terminal[d](backend.state(n, j));
            const auto s = evaluate_obstacles(xi, costs);
            const double gap = side_of(c) == Side::profit ? xi[c] - s[c] : s[c] - xi[c];
            if (gap < -terminal_slack) {
                std::ostringstream os;
                os << "violated by " << -gap << " at terminal node " << j;
                detail::record_first(bc, horizon, gap, os.str());
                break;
            }
        }
        report.checks.push_back(bc);
    }

    AssumptionCheck ito{"A4", "b_i and l_i carry Ito data (closed-form drift)"};
    for (int m = 1; m <= 2; ++m) {
        if (!problem.exit_benefit[m - 1].has_derivative())
            detail::record_first(ito, 0.0, 0.0, "b_" + std::to_string(m) + " has no Ito data");
        if (!problem.switching_cost[m - 1].has_derivative())
            detail::record_first(ito, 0.0, 0.0, "l_" + std::to_string(m) + " has no Ito data");
    }
    report.checks.push_back(ito);

    AssumptionCheck step{"step", "explicit scheme admissible: dt * Lipschitz < 1/2 (and monotone on the lattice)"};
    for (Component c : all_components) {
        const auto& d = problem.drivers[c];
        if (!explicit_step_admissible(d.lipschitz_y(), d.lipschitz_z(), backend)) {
            std::ostringstream os;
            os << "driver " << to_string(c) << " with Lipschitz " << d.lipschitz() << " needs more than " << n
               << " steps";
            detail::record_first(step, 0.0, backend.dt() * d.lipschitz(), os.str());
        }
    }
    report.checks.push_back(step);

    return report;
}

[[nodiscard]] inline ValidationReport validate_assumptions(const SwitchingProblem& problem, const TimeGrid& grid) {
    return validate_assumptions(problem, Backend::deterministic(grid));
}

}  // namespace switching

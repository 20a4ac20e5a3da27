#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "switching/grid.hpp"
#include "switching/model.hpp"
#include "switching/rbsde.hpp"
#include "switching/scheme.hpp"

namespace switching {

/// Two-mode problem with ℓ(t) = e^{−4t}, a = b = 0, ξ ≡ 1 and drivers
/// ψ₁⁺ = y, ψ₂⁺ = y + ℓ(t), ψ₁⁻ = 2y, ψ₂⁻ = 2y + ℓ(t). It has (at least)
/// two distinct solutions, given in closed form by ClosedFormFamily.
[[nodiscard]] inline SwitchingProblem counterexample_problem(double horizon) {
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    const auto ell = CoefficientFunction::exponential(1.0, -4.0);
    const auto zero = CoefficientFunction::constant(0.0);
    SwitchingProblem p;
    p.horizon = horizon;
    p.drivers[Component::profit1] = AffineDriver{zero, StateFeature::none, 1.0, 0.0};
    p.drivers[Component::profit2] = AffineDriver{ell, StateFeature::none, 1.0, 0.0};
    p.drivers[Component::cost1] = AffineDriver{zero, StateFeature::none, 2.0, 0.0};
    p.drivers[Component::cost2] = AffineDriver{ell, StateFeature::none, 2.0, 0.0};
    p.switching_cost = {ell, ell};
    p.exit_cost = {zero, zero};
    p.exit_benefit = {zero, zero};
    for (Component c : all_components) p.terminal[c] = StateFunction{1.0, 0.0};
    return p;
}

/// All drivers, terminal values and exit costs zero; ℓ ≡ 1.
[[nodiscard]] inline SwitchingProblem zero_problem(double horizon) {
    const auto zero = CoefficientFunction::constant(0.0);
    SwitchingProblem p;
    p.horizon = horizon;
    for (Component c : all_components) {
        p.drivers[c] = AffineDriver{zero, StateFeature::none, 0.0, 0.0};
        p.terminal[c] = StateFunction{0.0, 0.0};
    }
    p.switching_cost = {CoefficientFunction::constant(1.0), CoefficientFunction::constant(1.0)};
    p.exit_cost = {zero, zero};
    p.exit_benefit = {zero, zero};
    return p;
}

/// Closed-form solutions of counterexample_problem.
///
/// Family p ∈ {1, 2}: Y^{±,1} = e^{p(T−t)},
/// Y^{±,2} = e^{p(T−t)} + (e^{−4t} − e^{−(4−p)T − pt}) / (4 − p), Z ≡ 0.
/// Family 1 pushes only the cost sides (dK^{−,i}/dt = Y^{−,i}), family 2
/// only the profit sides (dK^{+,i}/dt = Y^{+,i}).
struct ClosedFormFamily {
    int id = 1;
    double horizon = 1.0;
    /// Multiplies Y^{+,1}; anything but 1 breaks the solution (used to exercise the auditor).
    double profit1_scale = 1.0;

    [[nodiscard]] double rate() const { return static_cast<double>(id); }

    [[nodiscard]] double base(double t) const { return std::exp(rate() * (horizon - t)); }

    [[nodiscard]] double correction(double t) const {
        const double p = rate();
        return (std::exp(-4.0 * t) - std::exp(-(4.0 - p) * horizon - p * t)) / (4.0 - p);
    }

    [[nodiscard]] double y(Component c, double t) const {
        const double v = mode_of(c) == 1 ? base(t) : base(t) + correction(t);
        return c == Component::profit1 ? profit1_scale * v : v;
    }

    [[nodiscard]] double y_second_derivative(Component c, double t) const {
        const double p = rate();
        double v = p * p * base(t);
        if (mode_of(c) == 2)
            v += (16.0 * std::exp(-4.0 * t) - p * p * std::exp(-(4.0 - p) * horizon - p * t)) / (4.0 - p);
        return v;
    }

    [[nodiscard]] bool pushes(Component c) const {
        return id == 1 ? side_of(c) == Side::cost : side_of(c) == Side::profit;
    }

    [[nodiscard]] double k_density(Component c, double t) const {
        if (!pushes(c)) return 0.0;
        return mode_of(c) == 1 ? base(t) : base(t) + correction(t);
    }

    /// K_t = ∫_0^t k_density.
    [[nodiscard]] double k_cumulative(Component c, double t) const {
        if (!pushes(c)) return 0.0;
        const double p = rate();
        double v = (std::exp(p * horizon) - std::exp(p * (horizon - t))) / p;
        if (mode_of(c) == 2)
            v += ((1.0 - std::exp(-4.0 * t)) / 4.0 - std::exp(-(4.0 - p) * horizon) * (1.0 - std::exp(-p * t)) / p) /
                 (4.0 - p);
        return v;
    }

    [[nodiscard]] double max_abs_second_derivative(const Backend& backend) const {
        double m = 0.0;
        for (Component c : all_components)
            for (std::size_t k = 0; k <= backend.steps(); ++k)
                m = std::max(m, std::abs(y_second_derivative(c, backend.time(k))));
        return m;
    }
};

/// Y, Z and reflection increments of a candidate solution on a backend.
struct SurfaceSet {
    PerComponent<FieldSurface> y;
    PerComponent<FieldSurface> z;
    PerComponent<FieldSurface> dk;
};

[[nodiscard]] inline SurfaceSet surfaces_of(const BalanceSheetSolution& sol) {
    SurfaceSet s;
    for (Component c : all_components) {
        s.y[c] = sol.parts[c].y;
        s.z[c] = sol.parts[c].z;
        s.dk[c] = sol.parts[c].dk;
    }
    return s;
}

/// Samples a closed-form family on every node of `backend`; ΔK_k = K(t_{k+1}) − K(t_k).
[[nodiscard]] inline SurfaceSet sample_family(const ClosedFormFamily& family, const Backend& backend) {
    SurfaceSet s;
    const std::size_t n = backend.steps();
    for (Component c : all_components) {
        s.y[c] = FieldSurface(backend);
        s.z[c] = FieldSurface(backend);
        s.dk[c] = FieldSurface(backend);
        for (std::size_t k = 0; k <= n; ++k) {
            const double t = backend.time(k);
            const double yv = family.y(c, t);
            const double dk = k < n ? family.k_cumulative(c, backend.time(k + 1)) - family.k_cumulative(c, t) : 0.0;
            for (std::size_t j = 0; j < backend.nodes(k); ++j) {
                s.y[c].at(k, j) = yv;
                s.dk[c].at(k, j) = dk;
            }
        }
    }
    return s;
}

struct ComponentResidual {
    /// max_k |Y_k − ξ − Σ_{m≥k}(ψΔt ± ΔK)|, accumulated in conditional expectation on the lattice.
    double max_step_residual = 0.0;
    /// max_k |Y_k − E_k[Y_{k+1}] − ψΔt ∓ ΔK_k|, the one-step defect.
    double max_local_defect = 0.0;
    double terminal_mismatch = 0.0;
    double constraint_violation = 0.0;
    double skorokhod_sum = 0.0;
    double k_monotonicity_violation = 0.0;
    double max_k_density = 0.0;
};

struct ResidualReport {
    double dt = 0.0;
    std::size_t steps = 0;
    PerComponent<ComponentResidual> components;

    [[nodiscard]] double max_step_residual() const {
        double m = 0.0;
        for (const auto& c : components.items) m = std::max(m, c.max_step_residual);
        return m;
    }
    [[nodiscard]] double max_constraint_violation() const {
        double m = 0.0;
        for (const auto& c : components.items) m = std::max(m, c.constraint_violation);
        return m;
    }
    [[nodiscard]] double max_skorokhod_sum() const {
        double m = 0.0;
        for (const auto& c : components.items) m = std::max(m, c.skorokhod_sum);
        return m;
    }
    [[nodiscard]] double max_k_monotonicity_violation() const {
        double m = 0.0;
        for (const auto& c : components.items) m = std::max(m, c.k_monotonicity_violation);
        return m;
    }
};

/// Recomputes every defining relation of the system on the candidate surfaces.
/// Reports only; see AuditThresholds for pass/fail.
[[nodiscard]] inline ResidualReport audit_solution(const SurfaceSet& cand, const SwitchingProblem& problem,
                                                   const Backend& backend) {
    for (Component c : all_components)
        if (!cand.y[c].matches(backend) || !cand.z[c].matches(backend) || !cand.dk[c].matches(backend))
            throw std::invalid_argument("candidate surfaces do not match the backend");

    const std::size_t n = backend.steps();
    const double dt = backend.dt();
    ResidualReport report;
    report.dt = dt;
    report.steps = n;

    for (Component c : all_components) {
        auto& out = report.components[c];
        const auto& y = cand.y[c];
        const auto& driver = problem.drivers[c];
        const double sign = side_of(c) == Side::profit ? 1.0 : -1.0;

        std::vector<double> acc(backend.nodes(n));
        for (std::size_t j = 0; j < acc.size(); ++j) {
            acc[j] = y.at(n, j) - problem.terminal[c](backend.state(n, j));
            out.terminal_mismatch = std::max(out.terminal_mismatch, std::abs(acc[j]));
            out.max_step_residual = std::max(out.max_step_residual, std::abs(acc[j]));
        }
        for (std::size_t k = n; k-- > 0;) {
            const auto mean = condexp(backend, y.step(k + 1), k);
            const auto carried = condexp(backend, acc, k);
            std::vector<double> next_acc(mean.size());
            for (std::size_t j = 0; j < mean.size(); ++j) {
                const double dk = cand.dk[c].at(k, j);
                const double r = y.at(k, j) - mean[j] -
                                 driver(backend.time(k), backend.state(k, j), mean[j], cand.z[c].at(k, j)) * dt -
                                 sign * dk;
                out.max_local_defect = std::max(out.max_local_defect, std::abs(r));
                next_acc[j] = r + carried[j];
                out.max_step_residual = std::max(out.max_step_residual, std::abs(next_acc[j]));
                out.k_monotonicity_violation = std::max(out.k_monotonicity_violation, -dk);
                out.max_k_density = std::max(out.max_k_density, dk / dt);
            }
            acc = std::move(next_acc);
        }
    }

    for (std::size_t k = 0; k <= n; ++k) {
        const auto costs = CostValues::at(problem, backend.time(k));
        for (std::size_t j = 0; j < backend.nodes(k); ++j) {
            PerComponent<double> yv;
            for (Component c : all_components) yv[c] = cand.y[c].at(k, j);
            const auto s = evaluate_obstacles(yv, costs);
            for (Component c : all_components) {
                auto& out = report.components[c];
                const double gap = side_of(c) == Side::profit ? yv[c] - s[c] : s[c] - yv[c];
                out.constraint_violation = std::max(out.constraint_violation, -gap);
                out.skorokhod_sum += std::abs(gap) * std::max(0.0, cand.dk[c].at(k, j));
            }
        }
    }
    return report;
}

/// Pass/fail limits for an audit. The step residual limit scales with Δt.
struct AuditThresholds {
    double step_residual = 5e-3;
    double constraint = 1e-12;
    double complementarity = 1e-10;

    /// step_residual = 10·max|y''|·Δt over both closed-form families.
    [[nodiscard]] static AuditThresholds calibrated(const Backend& backend) {
        AuditThresholds t;
        const double curvature = std::max(ClosedFormFamily{1, backend.grid().horizon()}.max_abs_second_derivative(backend),
                                          ClosedFormFamily{2, backend.grid().horizon()}.max_abs_second_derivative(backend));
        t.step_residual = 10.0 * curvature * backend.dt();
        return t;
    }

    [[nodiscard]] std::vector<std::string> failures(const ResidualReport& r) const {
        std::vector<std::string> out;
        for (Component c : all_components) {
            const auto& v = r.components[c];
            const std::string name = to_string(c);
            if (!(v.max_step_residual <= step_residual)) out.push_back(name + ": step residual");
            if (!(v.constraint_violation <= constraint)) out.push_back(name + ": constraint");
            if (!(v.skorokhod_sum <= complementarity)) out.push_back(name + ": complementarity");
            if (!(v.k_monotonicity_violation <= 0.0)) out.push_back(name + ": K not nondecreasing");
        }
        return out;
    }

    [[nodiscard]] bool passes(const ResidualReport& r) const { return failures(r).empty(); }
};

struct NonuniquenessReport {
    double horizon = 1.0;
    std::size_t steps = 0;
    AuditThresholds thresholds;
    ResidualReport family1;
    ResidualReport family2;
    bool family1_passes = false;
    bool family2_passes = false;
    double sup_distance = 0.0;
    double distance_at_zero = 0.0;
    /// Family 1 ≤ family 2 at every grid point and component.
    bool ordered = false;
    bool distinct = false;

    [[nodiscard]] bool confirmed() const { return family1_passes && family2_passes && distinct; }
};

/// Audits both closed-form families on the same grid and measures how far apart they are.
[[nodiscard]] inline NonuniquenessReport check_nonuniqueness(double horizon, std::size_t steps,
                                                             double profit1_scale = 1.0) {
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (steps < 2) throw std::invalid_argument("need at least two steps");
    const auto backend = Backend::deterministic(TimeGrid(horizon, steps));
    const auto problem = counterexample_problem(horizon);
    const ClosedFormFamily f1{1, horizon, profit1_scale};
    const ClosedFormFamily f2{2, horizon};

    NonuniquenessReport out;
    out.horizon = horizon;
    out.steps = steps;
    out.thresholds = AuditThresholds::calibrated(backend);
    out.family1 = audit_solution(sample_family(f1, backend), problem, backend);
    out.family2 = audit_solution(sample_family(f2, backend), problem, backend);
    out.family1_passes = out.thresholds.passes(out.family1);
    out.family2_passes = out.thresholds.passes(out.family2);

    out.ordered = true;
    for (Component c : all_components) {
        for (std::size_t k = 0; k <= steps; ++k) {
            const double t = backend.time(k);
            const double d = f2.y(c, t) - f1.y(c, t);
            out.sup_distance = std::max(out.sup_distance, std::abs(d));
            if (k == 0) out.distance_at_zero = std::max(out.distance_at_zero, std::abs(d));
            if (d < 0.0) out.ordered = false;
        }
    }
    out.distinct = out.sup_distance > 10.0 * out.thresholds.step_residual;
    return out;
}

/// max_k ΔK_k/Δt of one component, over all nodes.
[[nodiscard]] inline double max_k_density(const RbsdeSolution& sol, const Backend& backend) {
    double m = 0.0;
    for (double v : sol.dk.values()) m = std::max(m, v / backend.dt());
    return m;
}

}  // namespace switching

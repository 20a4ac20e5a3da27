#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "switching/grid.hpp"
#include "switching/model.hpp"

namespace switching {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

enum class Reflection { none, lower, upper };

/// Solution triple of a (reflected) BSDE on a backend.
///
/// `dk` holds the per-step reflection increments: dk(k, j) is the mass
/// K_{k+1} − K_k pushed at node (k, j), and dk at step N is zero. On the
/// lattice K itself is path dependent, so it is only materialized along a
/// path (`cumulative_along`), or as a surface on the deterministic backend.
struct RbsdeSolution {
    FieldSurface y;
    FieldSurface z;
    FieldSurface dk;

    RbsdeSolution() = default;
    explicit RbsdeSolution(const Backend& backend) : y(backend), z(backend), dk(backend) {}
};

/// Absolute slack on obstacle/terminal compatibility at T.
inline constexpr double obstacle_terminal_slack = 1e-12;

/// Tolerance for declaring obstacle contact at a node. 1e-10 absolute on the
/// deterministic backend, √Δt·1e-3 relative on the lattice.
[[nodiscard]] inline double contact_tolerance(const Backend& backend, double obstacle_value) {
    if (backend.kind() == BackendKind::deterministic) return 1e-10;
    return std::sqrt(backend.dt()) * 1e-3 * std::max(1.0, std::abs(obstacle_value));
}

/// Generator wrapper for callables without an affine structure.
template <class F>
struct FunctionDriver {
    F f;
    double lip_y = 0.0;
    double lip_z = 0.0;

    [[nodiscard]] double operator()(double t, double x, double y, double z) const { return f(t, x, y, z); }
    [[nodiscard]] double lipschitz_y() const { return lip_y; }
    [[nodiscard]] double lipschitz_z() const { return lip_z; }
};

template <class F>
FunctionDriver(F, double, double) -> FunctionDriver<F>;

/// ψ̌(t, x, y, z) = −ψ(t, x, −y, −z): the generator of −Y.
template <Driver D>
struct MirroredDriver {
    D inner;

    [[nodiscard]] double operator()(double t, double x, double y, double z) const { return -inner(t, x, -y, -z); }
    [[nodiscard]] double lipschitz_y() const { return inner.lipschitz_y(); }
    [[nodiscard]] double lipschitz_z() const { return inner.lipschitz_z(); }
};

/// Throws std::domain_error if the explicit step is not admissible for `driver` on `backend`.
template <Driver D>
void check_step_size(const D& driver, const Backend& backend) {
    if (!explicit_step_admissible(driver.lipschitz_y(), driver.lipschitz_z(), backend)) {
        throw std::domain_error("explicit scheme needs dt*(Ly+Lz) < 1/2 (and Lz*sqrt(dt) <= 1 - Ly*dt on the lattice); "
                                "dt = " + std::to_string(backend.dt()) + " is too coarse");
    }
}

/// Terminal node values from a state function.
[[nodiscard]] inline std::vector<double> terminal_values(const Backend& backend, const StateFunction& xi) {
    const std::size_t n = backend.steps();
    std::vector<double> out(backend.nodes(n));
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = xi(backend.state(n, j));
    return out;
}

/// Backward explicit scheme with optional projection onto an obstacle.
///
///   Z_k = E_k[Y_{k+1} ΔB]/Δt,  ỹ_k = E_k[Y_{k+1}] + ψ(t_k, x, E_k[Y_{k+1}], Z_k)Δt,
///   lower: Y_k = ỹ_k ∨ S_k, ΔK_k = Y_k − ỹ_k;  upper: Y_k = ỹ_k ∧ S_k, ΔK_k = ỹ_k − Y_k.
///
/// `obstacle` may be null (plain BSDE); ±∞ entries mean no constraint at that node.
template <Driver D>
[[nodiscard]] RbsdeSolution solve_reflected(const D& driver, std::span<const double> terminal,
                                            const FieldSurface* obstacle, Reflection reflection,
                                            const Backend& backend) {
    const std::size_t n = backend.steps();
    if (terminal.size() != backend.nodes(n)) throw std::invalid_argument("terminal values do not match the lattice");
    if (obstacle && !obstacle->matches(backend)) throw std::invalid_argument("obstacle surface does not match the backend");
    if (reflection != Reflection::none && !obstacle) throw std::invalid_argument("reflected BSDE needs an obstacle");
    check_step_size(driver, backend);

    RbsdeSolution sol(backend);
    const double dt = backend.dt();

    for (std::size_t j = 0; j < terminal.size(); ++j) {
        const double xi = terminal[j];
        if (reflection != Reflection::none) {
            const double s = obstacle->at(n, j);
            const bool bad = reflection == Reflection::lower ? s > xi + obstacle_terminal_slack
                                                             : s < xi - obstacle_terminal_slack;
            if (bad) {
                throw std::invalid_argument("obstacle and terminal value are inconsistent at T (node " +
                                            std::to_string(j) + ": obstacle " + std::to_string(s) + ", terminal " +
                                            std::to_string(xi) + ")");
            }
        }
        sol.y.at(n, j) = xi;
    }

    for (std::size_t k = n; k-- > 0;) {
        const auto next = sol.y.step(k + 1);
        const auto mean = condexp(backend, next, k);
        const auto z = martingale_projection(backend, next, k);
        const double t = backend.time(k);
        auto y = sol.y.step(k);
        auto zk = sol.z.step(k);
        auto dk = sol.dk.step(k);
        for (std::size_t j = 0; j < y.size(); ++j) {
            const double free = mean[j] + driver(t, backend.state(k, j), mean[j], z[j]) * dt;
            double value = free;
            if (reflection == Reflection::lower) value = std::max(free, obstacle->at(k, j));
            else if (reflection == Reflection::upper) value = std::min(free, obstacle->at(k, j));
            y[j] = value;
            zk[j] = z[j];
            dk[j] = std::abs(value - free);
        }
    }
    return sol;
}

template <Driver D>
[[nodiscard]] RbsdeSolution solve_bsde(const D& driver, std::span<const double> terminal, const Backend& backend) {
    return solve_reflected(driver, terminal, nullptr, Reflection::none, backend);
}

template <Driver D>
[[nodiscard]] RbsdeSolution solve_rbsde_lower(const D& driver, std::span<const double> terminal,
                                              const FieldSurface& obstacle, const Backend& backend) {
    return solve_reflected(driver, terminal, &obstacle, Reflection::lower, backend);
}

template <Driver D>
[[nodiscard]] RbsdeSolution solve_rbsde_upper(const D& driver, std::span<const double> terminal,
                                              const FieldSurface& obstacle, const Backend& backend) {
    return solve_reflected(driver, terminal, &obstacle, Reflection::upper, backend);
}

/// K_k along a path, K_0 = 0.
[[nodiscard]] inline std::vector<double> cumulative_along(const FieldSurface& dk, const LatticePath& path) {
    std::vector<double> k(path.size(), 0.0);
    for (std::size_t s = 0; s + 1 < path.size(); ++s) k[s + 1] = k[s] + dk.at(s, path[s]);
    return k;
}

/// Cumulative K on the deterministic backend (single path).
[[nodiscard]] inline std::vector<double> cumulative_k(const FieldSurface& dk) {
    return cumulative_along(dk, LatticePath(dk.steps() + 1, 0));
}

/// Σ_k (Y_k − S_k)ΔK_k for lower, Σ_k (S_k − Y_k)ΔK_k for upper, over all nodes.
[[nodiscard]] inline double skorokhod_sum(const RbsdeSolution& sol, const FieldSurface& obstacle,
                                          Reflection reflection) {
    double acc = 0.0;
    const auto y = sol.y.values();
    const auto s = obstacle.values();
    const auto dk = sol.dk.values();
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (dk[i] == 0.0) continue;
        const double gap = reflection == Reflection::upper ? s[i] - y[i] : y[i] - s[i];
        acc += std::abs(gap) * dk[i];
    }
    return acc;
}

/// sup|Y|² + E[Σ Z²Δt] + E[K_T²]: the quantity controlled by the a-priori estimate.
[[nodiscard]] inline double apriori_norm(const RbsdeSolution& sol, const Backend& backend) {
    const std::size_t n = backend.steps();
    const double dt = backend.dt();
    double sup_y = 0.0;
    for (double v : sol.y.values()) sup_y = std::max(sup_y, std::abs(v));

    // Backward recursions for E_k[Σ_{m≥k} Z_m²Δt], E_k[K_N − K_k] and E_k[(K_N − K_k)²].
    std::vector<double> zz(backend.nodes(n), 0.0), kk1(backend.nodes(n), 0.0), kk2(backend.nodes(n), 0.0);
    for (std::size_t k = n; k-- > 0;) {
        const auto ez = condexp(backend, zz, k);
        const auto e1 = condexp(backend, kk1, k);
        const auto e2 = condexp(backend, kk2, k);
        std::vector<double> nz(ez.size()), n1(ez.size()), n2(ez.size());
        for (std::size_t j = 0; j < ez.size(); ++j) {
            const double zv = sol.z.at(k, j);
            const double d = sol.dk.at(k, j);
            nz[j] = zv * zv * dt + ez[j];
            n1[j] = d + e1[j];
            n2[j] = d * d + 2.0 * d * e1[j] + e2[j];
        }
        zz = std::move(nz);
        kk1 = std::move(n1);
        kk2 = std::move(n2);
    }
    return sup_y * sup_y + zz[0] + kk2[0];
}

/// Discrete Snell envelope of a payoff surface with its contact set.
struct SnellEnvelope {
    FieldSurface envelope;
    /// 1 where envelope equals payoff within contact tolerance.
    FieldSurface contact;

    /// First k' ≥ from_step along `path` where the envelope touches the payoff.
    [[nodiscard]] std::size_t hitting_step(const LatticePath& path, std::size_t from_step) const {
        for (std::size_t k = from_step; k < path.size(); ++k)
            if (contact.at(k, path[k]) != 0.0) return k;
        return path.size() - 1;
    }
};

/// Envelope_N = U_N, Envelope_k = U_k ∨ E_k[Envelope_{k+1}].
[[nodiscard]] inline SnellEnvelope snell_envelope(const FieldSurface& payoff, const Backend& backend) {
    if (!payoff.matches(backend)) throw std::invalid_argument("payoff surface does not match the backend");
    for (double v : payoff.values())
        if (!std::isfinite(v)) throw std::invalid_argument("payoff must be finite");
    const std::size_t n = backend.steps();
    SnellEnvelope out{FieldSurface(backend), FieldSurface(backend)};
    for (std::size_t j = 0; j < backend.nodes(n); ++j) {
        out.envelope.at(n, j) = payoff.at(n, j);
        out.contact.at(n, j) = 1.0;
    }
    for (std::size_t k = n; k-- > 0;) {
        const auto cont = condexp(backend, out.envelope.step(k + 1), k);
        for (std::size_t j = 0; j < cont.size(); ++j) {
            const double u = payoff.at(k, j);
            const double v = std::max(u, cont[j]);
            out.envelope.at(k, j) = v;
            out.contact.at(k, j) = (v - u <= contact_tolerance(backend, u)) ? 1.0 : 0.0;
        }
    }
    return out;
}

}  // namespace switching

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace switching {

/// Uniform grid t_k = k * T / N, k = 0..N.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("time grid: horizon must be positive");
        if (steps < 1) throw std::invalid_argument("time grid: need at least one step");
    }

    [[nodiscard]] double horizon() const { return horizon_; }
    [[nodiscard]] std::size_t steps() const { return steps_; }
    [[nodiscard]] double dt() const { return horizon_ / static_cast<double>(steps_); }
    [[nodiscard]] double time(std::size_t k) const {
        return k == steps_ ? horizon_ : static_cast<double>(k) * dt();
    }

private:
    double horizon_;
    std::size_t steps_;
};

enum class BackendKind { deterministic, binomial };

[[nodiscard]] inline std::string to_string(BackendKind kind) {
    return kind == BackendKind::deterministic ? "deterministic" : "binomial";
}

[[nodiscard]] inline BackendKind parse_backend_kind(const std::string& name) {
    if (name == "deterministic") return BackendKind::deterministic;
    if (name == "binomial") return BackendKind::binomial;
    throw std::invalid_argument("unknown backend '" + name + "' (expected deterministic or binomial)");
}

/// Node layout plus the state process on it.
///
/// The binomial backend is the symmetric random walk with increments ±√Δt.
/// Node j at step k carries x = (k − 2j)√Δt; its successors at step k+1 are
/// node j (up) and node j+1 (down), each with probability ½. The deterministic
/// backend has a single node per step with x = 0.
class Backend {
public:
    [[nodiscard]] static Backend deterministic(TimeGrid grid) { return Backend(BackendKind::deterministic, grid); }
    [[nodiscard]] static Backend binomial(TimeGrid grid) { return Backend(BackendKind::binomial, grid); }
    [[nodiscard]] static Backend make(BackendKind kind, TimeGrid grid) { return Backend(kind, grid); }

    [[nodiscard]] BackendKind kind() const { return kind_; }
    [[nodiscard]] const TimeGrid& grid() const { return grid_; }
    [[nodiscard]] std::size_t steps() const { return grid_.steps(); }
    [[nodiscard]] double dt() const { return grid_.dt(); }
    [[nodiscard]] double time(std::size_t k) const { return grid_.time(k); }

    [[nodiscard]] std::size_t nodes(std::size_t k) const {
        return kind_ == BackendKind::deterministic ? 1 : k + 1;
    }

    /// Offset of step k in a flattened surface.
    [[nodiscard]] std::size_t offset(std::size_t k) const {
        return kind_ == BackendKind::deterministic ? k : k * (k + 1) / 2;
    }

    [[nodiscard]] std::size_t total_nodes() const { return offset(steps() + 1); }

    [[nodiscard]] double state(std::size_t k, std::size_t j) const {
        if (kind_ == BackendKind::deterministic) return 0.0;
        return (static_cast<double>(k) - 2.0 * static_cast<double>(j)) * std::sqrt(dt());
    }

    /// Unconditional probability of reaching node j at step k.
    [[nodiscard]] double node_probability(std::size_t k, std::size_t j) const {
        if (kind_ == BackendKind::deterministic) return 1.0;
        // C(k, j) / 2^k via lgamma keeps large k finite.
        const double kk = static_cast<double>(k);
        const double jj = static_cast<double>(j);
        return std::exp(std::lgamma(kk + 1) - std::lgamma(jj + 1) - std::lgamma(kk - jj + 1) - kk * std::log(2.0));
    }

    friend bool operator==(const Backend& a, const Backend& b) {
        return a.kind_ == b.kind_ && a.grid_.steps() == b.grid_.steps() && a.grid_.horizon() == b.grid_.horizon();
    }

private:
    Backend(BackendKind kind, TimeGrid grid) : kind_(kind), grid_(grid) {}

    BackendKind kind_;
    TimeGrid grid_;
};

/// One adapted process sampled on every node of a backend.
class FieldSurface {
public:
    FieldSurface() = default;
    explicit FieldSurface(const Backend& backend, double fill = 0.0)
        : steps_(backend.steps()), kind_(backend.kind()), values_(backend.total_nodes(), fill) {}

    [[nodiscard]] std::size_t steps() const { return steps_; }
    [[nodiscard]] std::size_t nodes(std::size_t k) const { return kind_ == BackendKind::deterministic ? 1 : k + 1; }

    [[nodiscard]] std::span<double> step(std::size_t k) { return {values_.data() + offset(k), nodes(k)}; }
    [[nodiscard]] std::span<const double> step(std::size_t k) const { return {values_.data() + offset(k), nodes(k)}; }

    [[nodiscard]] double& at(std::size_t k, std::size_t j) { return values_[offset(k) + j]; }
    [[nodiscard]] double at(std::size_t k, std::size_t j) const { return values_[offset(k) + j]; }

    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] std::span<double> values() { return values_; }

    [[nodiscard]] bool matches(const Backend& backend) const {
        return backend.kind() == kind_ && backend.steps() == steps_;
    }

private:
    [[nodiscard]] std::size_t offset(std::size_t k) const {
        return kind_ == BackendKind::deterministic ? k : k * (k + 1) / 2;
    }

    std::size_t steps_ = 0;
    BackendKind kind_ = BackendKind::deterministic;
    std::vector<double> values_;
};

namespace detail {

inline void check_next_shape(const Backend& backend, std::span<const double> next, std::size_t k) {
    if (k >= backend.steps()) throw std::out_of_range("step index must be below the number of steps");
    if (next.size() != backend.nodes(k + 1))
        throw std::invalid_argument("node values have " + std::to_string(next.size()) + " entries, step " +
                                    std::to_string(k + 1) + " has " + std::to_string(backend.nodes(k + 1)));
}

}  // namespace detail

/// E_k[next]: values at step k given values at step k+1.
[[nodiscard]] inline std::vector<double> condexp(const Backend& backend, std::span<const double> next, std::size_t k) {
    detail::check_next_shape(backend, next, k);
    if (backend.kind() == BackendKind::deterministic) return {next[0]};
    std::vector<double> out(k + 1);
    for (std::size_t j = 0; j <= k; ++j) out[j] = 0.5 * (next[j] + next[j + 1]);
    return out;
}

/// Z_k = E_k[next · ΔB] / Δt, the discrete martingale-representation integrand.
[[nodiscard]] inline std::vector<double> martingale_projection(const Backend& backend, std::span<const double> next,
                                                               std::size_t k) {
    detail::check_next_shape(backend, next, k);
    if (backend.kind() == BackendKind::deterministic) return {0.0};
    const double denom = 2.0 * std::sqrt(backend.dt());
    std::vector<double> out(k + 1);
    for (std::size_t j = 0; j <= k; ++j) out[j] = (next[j] - next[j + 1]) / denom;
    return out;
}

/// Sequence of node indices, one per step 0..N.
using LatticePath = std::vector<std::size_t>;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Path number `index` of the stream identified by `seed`. Each path owns an
/// independent generator, so paths can be produced in any order or in parallel.
[[nodiscard]] inline LatticePath sample_path(const Backend& backend, std::uint64_t seed, std::uint64_t index) {
    LatticePath path(backend.steps() + 1, 0);
    if (backend.kind() == BackendKind::deterministic) return path;
    std::mt19937_64 rng(detail::splitmix64(detail::splitmix64(seed) ^ index));
    for (std::size_t k = 0; k < backend.steps(); ++k) path[k + 1] = path[k] + static_cast<std::size_t>(rng() >> 63);
    return path;
}

[[nodiscard]] inline std::vector<LatticePath> sample_paths(const Backend& backend, std::size_t n_paths,
                                                           std::uint64_t seed) {
    if (n_paths < 1) throw std::invalid_argument("sample_paths: need at least one path");
    if (backend.kind() == BackendKind::deterministic) return {LatticePath(backend.steps() + 1, 0)};
    std::vector<LatticePath> paths;
    paths.reserve(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) paths.push_back(sample_path(backend, seed, p));
    return paths;
}

}  // namespace switching

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "switching/grid.hpp"

namespace switching {
namespace {

Backend lattice(std::size_t n, double horizon = 1.0) { return Backend::binomial(TimeGrid(horizon, n)); }

TEST(TimeGrid, RejectsBadInput) {
    EXPECT_THROW(TimeGrid(0.0, 10), std::invalid_argument);
    EXPECT_THROW(TimeGrid(1.0, 0), std::invalid_argument);
    const TimeGrid g(2.0, 8);
    EXPECT_DOUBLE_EQ(g.dt(), 0.25);
    EXPECT_EQ(g.time(8), 2.0);
}

TEST(Backend, NodeLayout) {
    const auto b = lattice(4);
    EXPECT_EQ(b.nodes(3), 4U);
    EXPECT_EQ(b.total_nodes(), 15U);
    EXPECT_DOUBLE_EQ(b.state(2, 0), 2.0 * 0.5);
    EXPECT_DOUBLE_EQ(b.state(2, 2), -2.0 * 0.5);
    EXPECT_NEAR(b.node_probability(4, 2), 6.0 / 16.0, 1e-14);
    const auto d = Backend::deterministic(TimeGrid(1.0, 4));
    EXPECT_EQ(d.total_nodes(), 5U);
    EXPECT_EQ(d.state(3, 0), 0.0);
}

TEST(Condexp, PreservesConstants) {
    const auto b = lattice(6);
    const std::vector<double> next(7, 3.25);
    for (double v : condexp(b, next, 5)) EXPECT_EQ(v, 3.25);
}

TEST(Condexp, FairCoin) {
    const auto b = lattice(1);
    const std::vector<double> next{1.0, 0.0};
    EXPECT_EQ(condexp(b, next, 0)[0], 0.5);
}

TEST(Condexp, TowerAtDepthTwo) {
    const auto b = lattice(2);
    const std::vector<double> top{1.0, 2.0, 4.0};
    const auto mid = condexp(b, top, 1);
    EXPECT_DOUBLE_EQ(condexp(b, mid, 0)[0], 2.25);
}

TEST(Condexp, DeterministicIsIdentity) {
    const auto d = Backend::deterministic(TimeGrid(1.0, 3));
    const std::vector<double> next{7.0};
    EXPECT_EQ(condexp(d, next, 1)[0], 7.0);
    EXPECT_EQ(martingale_projection(d, next, 1)[0], 0.0);
}

TEST(Condexp, RejectsShapeMismatch) {
    const auto b = lattice(3);
    const std::vector<double> wrong{1.0, 2.0};
    EXPECT_THROW((void)condexp(b, wrong, 2), std::invalid_argument);
    EXPECT_THROW((void)martingale_projection(b, wrong, 2), std::invalid_argument);
    EXPECT_THROW((void)condexp(b, wrong, 3), std::out_of_range);
}

TEST(Condexp, TowerMatchesPathEnumeration) {
    std::mt19937_64 rng(11);
    for (std::size_t depth = 1; depth <= 4; ++depth) {
        const auto b = lattice(depth);
        const auto f = oracle::random_surface(b, rng, -5.0, 5.0);
        for (std::size_t m = 1; m <= depth; ++m) {
            for (std::size_t k = 0; k < m; ++k) {
                std::vector<double> v(f.step(m).begin(), f.step(m).end());
                for (std::size_t s = m; s-- > k;) v = condexp(b, v, s);
                for (std::size_t j = 0; j <= k; ++j) EXPECT_NEAR(v[j], oracle::path_expectation(f, k, j, m), 1e-12);
            }
        }
    }
}

TEST(Condexp, Linear) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    const auto b = lattice(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto u = oracle::random_surface(b, rng, -2.0, 2.0);
        const auto v = oracle::random_surface(b, rng, -2.0, 2.0);
        const double alpha = coef(rng);
        const double beta = coef(rng);
        for (std::size_t k = 0; k < 4; ++k) {
            std::vector<double> mix(k + 2);
            for (std::size_t j = 0; j < mix.size(); ++j) mix[j] = alpha * u.at(k + 1, j) + beta * v.at(k + 1, j);
            const auto lhs = condexp(b, mix, k);
            const auto eu = condexp(b, u.step(k + 1), k);
            const auto ev = condexp(b, v.step(k + 1), k);
            for (std::size_t j = 0; j <= k; ++j) EXPECT_NEAR(lhs[j], alpha * eu[j] + beta * ev[j], 1e-12);
        }
    }
}

TEST(MartingaleProjection, ConstantGivesZero) {
    const auto b = lattice(5);
    const std::vector<double> next(6, -1.5);
    for (double z : martingale_projection(b, next, 4)) EXPECT_EQ(z, 0.0);
}

TEST(MartingaleProjection, StateGivesOne) {
    const auto b = lattice(8, 2.0);
    std::vector<double> next(9);
    for (std::size_t j = 0; j < next.size(); ++j) next[j] = b.state(8, j);
    for (double z : martingale_projection(b, next, 7)) EXPECT_NEAR(z, 1.0, 1e-12);
}

TEST(MartingaleProjection, SquareAtRoot) {
    const auto b = lattice(1, 0.3);
    const std::vector<double> next{std::pow(b.state(1, 0), 2), std::pow(b.state(1, 1), 2)};
    EXPECT_NEAR(martingale_projection(b, next, 0)[0], 2.0 * b.state(0, 0), 1e-14);
}

TEST(SamplePaths, DeterministicSinglePath) {
    const auto d = Backend::deterministic(TimeGrid(1.0, 5));
    const auto paths = sample_paths(d, 100, 7);
    ASSERT_EQ(paths.size(), 1U);
    EXPECT_EQ(paths[0], LatticePath(6, 0));
}

TEST(SamplePaths, ReproducibleAndValid) {
    const auto b = lattice(30);
    const auto a = sample_paths(b, 50, 99);
    EXPECT_EQ(a, sample_paths(b, 50, 99));
    EXPECT_NE(a, sample_paths(b, 50, 100));
    for (const auto& p : a) {
        ASSERT_EQ(p.size(), 31U);
        EXPECT_EQ(p[0], 0U);
        for (std::size_t k = 0; k < 30; ++k) EXPECT_LE(p[k + 1] - p[k], 1U);
    }
    EXPECT_EQ(sample_path(b, 99, 17), a[17]);
    EXPECT_THROW((void)sample_paths(b, 0, 1), std::invalid_argument);
}

TEST(SamplePaths, FairFirstMove) {
    const auto b = lattice(3);
    const auto paths = sample_paths(b, 100000, 2024);
    std::size_t up = 0;
    for (const auto& p : paths) up += p[1] == 0 ? 1 : 0;
    EXPECT_NEAR(static_cast<double>(up) / 1e5, 0.5, 0.01);
}

}  // namespace
}  // namespace switching

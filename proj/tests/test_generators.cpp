#include "closedobs/error.hpp"
#include "closedobs/generators.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace closedobs;

namespace {

// Classical RK4 on da/dt = -a + R a, independent of the closed form.
RealVector spiral_rk4(RealVector a, double t, int steps) {
    auto f = [](const RealVector &v) { return RealVector{-v[0] - v[1], v[0] - v[1]}; };
    const double h = t / steps;
    for (int s = 0; s < steps; ++s) {
        const auto k1 = f(a);
        const auto k2 = f({a[0] + 0.5 * h * k1[0], a[1] + 0.5 * h * k1[1]});
        const auto k3 = f({a[0] + 0.5 * h * k2[0], a[1] + 0.5 * h * k2[1]});
        const auto k4 = f({a[0] + h * k3[0], a[1] + h * k3[1]});
        for (int i = 0; i < 2; ++i) a[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    }
    return a;
}

double sum(const RealVector &v) { return std::accumulate(v.begin(), v.end(), 0.0); }

} // namespace

TEST(Generators, SpiralClosedFormMatchesIntegration) {
    for (const RealVector a0 : {RealVector{1.0, 0.0}, RealVector{-0.3, 0.7}}) {
        for (double t : {0.0, 0.4, 2.0}) {
            const auto exact = spiral_state(a0, t);
            const auto num = spiral_rk4(a0, t, 4000);
            EXPECT_NEAR(exact[0], num[0], 1e-12);
            EXPECT_NEAR(exact[1], num[1], 1e-12);
        }
    }
}

TEST(Generators, SpiralObservesRadius) {
    SpiralConfig sc;
    sc.initial_points = {{0.6, -0.8}, {0.0, 0.0}};
    sc.dt = 0.25;
    sc.t_end = 2.0;
    const auto b = gen_spiral(sc);
    ASSERT_EQ(b.trajectories.size(), 2u);
    ASSERT_EQ(b.trajectories[0].length(), 9u);
    for (std::size_t k = 0; k < 9; ++k) {
        const auto a = spiral_state({0.6, -0.8}, 0.25 * static_cast<double>(k));
        EXPECT_NEAR(b.trajectories[0].observations[k][0], std::hypot(a[0], a[1]), 1e-15);
        EXPECT_EQ(b.trajectories[1].observations[k][0], 0.0);
    }
    sc.initial_points.clear();
    sc.grid = 21;
    EXPECT_EQ(gen_spiral(sc).trajectories.size(), 441u);
    sc.dt = 0.0;
    EXPECT_THROW(gen_spiral(sc), Error);
}

TEST(Generators, PdeInitialProfileIsSampledGaussian) {
    const auto u = pde_profile(0.7, 0.0, 64);
    for (std::size_t j = 0; j < 64; ++j) {
        const double x = -0.5 + static_cast<double>(j) / 64.0;
        EXPECT_NEAR(u[j], std::exp(-25.0 * x * x), 1e-13);
    }
}

TEST(Generators, PdeConservesMass) {
    const double m0 = sum(pde_profile(1.0, 0.0, 64));
    for (double t : {0.01, 0.1, 1.0}) EXPECT_NEAR(sum(pde_profile(1.4 / 2.0, t, 64)), m0, 1e-12);
}

TEST(Generators, PureTransportShiftsByGridCells) {
    // kappa = 0, speed 10: after t = s / (10 nx) the profile is cyclically shifted by s cells.
    const std::size_t nx = 32;
    const auto u0 = pde_profile(0.0, 0.0, nx);
    for (std::size_t s : {1u, 5u, 31u}) {
        const auto u = pde_profile(0.0, static_cast<double>(s) / (10.0 * nx), nx);
        for (std::size_t j = 0; j < nx; ++j) EXPECT_NEAR(u[(j + s) % nx], u0[j], 1e-12);
    }
}

TEST(Generators, PureDiffusionKeepsMirrorSymmetryAndFlattens) {
    const std::size_t nx = 64;
    const auto u = pde_profile(0.5, 0.05, nx, 0.0);
    for (std::size_t j = 1; j < nx; ++j) EXPECT_NEAR(u[j], u[nx - j], 1e-13);
    const auto late = pde_profile(0.5, 5.0, nx, 0.0);
    const double mean = sum(late) / nx;
    for (double v : late) EXPECT_NEAR(v, mean, 1e-12);
}

TEST(Generators, PdeDependsOnlyOnRatio) {
    PdeConfig a, b;
    a.c_values = {1.4};
    a.d_values = {2.0};
    b.c_values = {2.8};
    b.d_values = {4.0};
    const auto ta = gen_transport_diffusion(a), tb = gen_transport_diffusion(b);
    for (std::size_t k = 0; k < ta.trajectories[0].length(); ++k)
        for (std::size_t j = 0; j < 64; ++j)
            EXPECT_NEAR(ta.trajectories[0].observations[k][j], tb.trajectories[0].observations[k][j], 1e-9);
}

TEST(Generators, PdeRejectsDegenerateParameters) {
    PdeConfig c;
    c.d_values = {0.0};
    EXPECT_THROW(gen_transport_diffusion(c), Error);
    c.d_values = {-1.0};
    EXPECT_THROW(gen_transport_diffusion(c), Error);
    c = PdeConfig{};
    c.nx = 15;
    EXPECT_THROW(gen_transport_diffusion(c), Error);
}

TEST(Generators, EgressConservesAndDrains) {
    EgressConfig cfg;
    cfg.N_T0_values = {48};
    cfg.N_P0_values = {42, 0};
    cfg.runs_per_pair = 3;
    const auto b = gen_egress(cfg);
    ASSERT_EQ(b.trajectories.size(), 6u);
    for (const auto &tr : b.trajectories) {
        ASSERT_EQ(tr.length(), 51u);
        const double total = tr.input[0] + tr.input[1];
        for (std::size_t k = 0; k < tr.length(); ++k) {
            EXPECT_EQ(tr.observations[k][0] + tr.observations[k][1], total);
            EXPECT_GE(tr.observations[k][0], 0.0);
            if (k) EXPECT_LE(tr.observations[k][0], tr.observations[k - 1][0]);
        }
        EXPECT_EQ(tr.observations.back()[0], 0.0);
    }
}

TEST(Generators, EgressIsSeededPerRun) {
    EgressConfig cfg;
    const auto a = egress_run(cfg, 50, 100, 3, 4), b = egress_run(cfg, 50, 100, 3, 4);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, egress_run(cfg, 50, 100, 3, 5));
    cfg.seed = 2;
    EXPECT_NE(a, egress_run(cfg, 50, 100, 3, 4));
}

TEST(Generators, EgressMeanFlowMatchesRate) {
    EgressConfig cfg;
    cfg.duration = 1;
    const long np = 100;
    const double rate = cfg.door_rate_base / (1.0 + cfg.congestion_coefficient * np / cfg.platform_capacity);
    const int runs = 4000;
    double total = 0.0;
    for (int r = 0; r < runs; ++r) total += 1000.0 - egress_run(cfg, 1000, np, 0, static_cast<std::uint64_t>(r))[1][0];
    // Poisson: standard error of the mean is sqrt(rate / runs).
    EXPECT_NEAR(total / runs, rate, 5.0 * std::sqrt(rate / runs));
}

TEST(Generators, EgressValidation) {
    EgressConfig cfg;
    cfg.N_T0_values = {-1};
    EXPECT_THROW(gen_egress(cfg), Error);
    cfg = EgressConfig{};
    cfg.runs_per_pair = 0;
    EXPECT_THROW(gen_egress(cfg), Error);
    cfg = EgressConfig{};
    cfg.platform_capacity = 0.0;
    EXPECT_THROW(gen_egress(cfg), Error);
}

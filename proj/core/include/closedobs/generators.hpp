#pragma once

#include "closedobs/timeseries.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace closedobs {

// da/dt = -a + R a with R = [0 -1; 1 0], observed through y = |a|.
// Closed form: a(t) = exp(-t) Rot(t) a0.
struct SpiralConfig {
    std::size_t grid = 21; // points per axis on [lo, hi]^2
    double lo = -1.0, hi = 1.0;
    double dt = 0.1;
    double t_end = 2.0;
    std::vector<RealVector> initial_points; // overrides the grid when non-empty
};

// c u_xx = d u_t + a(d) u_x on [-0.5, 0.5), periodic, u(x,0) = exp(-25 x^2),
// with a(d) = transport_factor * d. Solved exactly per Fourier mode.
struct PdeConfig {
    std::vector<double> c_values{1.4, 2.0, 3.0};
    std::vector<double> d_values{2.0, 4.0, 6.0};
    std::size_t nx = 64;
    double dt = 0.05;
    double t_end = 1.0;
    double transport_factor = 10.0;
};

// Stochastic stand-in for passengers leaving a train through one door onto a
// platform. Each second min(N_T, Poisson(rate)) people move from train to
// platform, rate = door_rate_base / (1 + congestion_coefficient * N_P / platform_capacity).
struct EgressConfig {
    std::vector<long> N_T0_values{10, 20, 30, 40, 50};
    std::vector<long> N_P0_values{0, 20, 40, 60, 80, 100, 120, 140, 160, 180, 200};
    std::size_t runs_per_pair = 10;
    std::size_t duration = 50; // seconds, sampled every second
    std::uint64_t seed = 1;
    double door_rate_base = 4.5;
    double congestion_coefficient = 1.0;
    double platform_capacity = 200.0;
};

/// Exact spiral state at time t from a0.
RealVector spiral_state(const RealVector &a0, double t);

TrajectoryBundle gen_spiral(const SpiralConfig &cfg);

/// u(x_j, t) on the nx-point grid x_j = -0.5 + j/nx for diffusion ratio kappa = c/d.
RealVector pde_profile(double kappa, double t, std::size_t nx, double transport = 10.0);

TrajectoryBundle gen_transport_diffusion(const PdeConfig &cfg);

/// One run of the egress stand-in; returns (N_T, N_P) for t = 0..duration.
std::vector<RealVector> egress_run(const EgressConfig &cfg, long N_T0, long N_P0, std::uint64_t pair_index,
                                   std::uint64_t run_index);

TrajectoryBundle gen_egress(const EgressConfig &cfg);

} // namespace closedobs

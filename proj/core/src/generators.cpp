#include "closedobs/generators.hpp"

#include "closedobs/error.hpp"
#include "closedobs/parallel.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

namespace closedobs {

namespace {

std::size_t step_count(double dt, double t_end) {
    if (!(dt > 0.0) || !(t_end >= dt))
        throw Error(ErrorCode::invalid_argument, "need dt > 0 and t_end >= dt");
    return static_cast<std::size_t>(std::floor(t_end / dt + 1e-9));
}

} // namespace

RealVector spiral_state(const RealVector &a0, double t) {
    const double s = std::exp(-t), c = std::cos(t), sn = std::sin(t);
    return {s * (c * a0[0] - sn * a0[1]), s * (sn * a0[0] + c * a0[1])};
}

TrajectoryBundle gen_spiral(const SpiralConfig &cfg) {
    std::vector<RealVector> starts = cfg.initial_points;
    if (starts.empty()) {
        if (cfg.grid < 2) throw Error(ErrorCode::invalid_argument, "spiral grid needs >= 2 points per axis");
        for (std::size_t i = 0; i < cfg.grid; ++i)
            for (std::size_t j = 0; j < cfg.grid; ++j) {
                const double h = (cfg.hi - cfg.lo) / static_cast<double>(cfg.grid - 1);
                starts.push_back({cfg.lo + static_cast<double>(i) * h, cfg.lo + static_cast<double>(j) * h});
            }
    }
    for (const auto &a : starts)
        if (a.size() != 2) throw Error(ErrorCode::invalid_argument, "spiral initial points are 2-vectors");
    const std::size_t steps = step_count(cfg.dt, cfg.t_end);

    TrajectoryBundle b;
    b.dt = cfg.dt;
    b.n0 = 2;
    b.m = 1;
    b.meta = {{"generator", "spiral"}, {"dt", format_real(cfg.dt)}, {"t_end", format_real(cfg.t_end)}};
    b.trajectories.resize(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) {
        Trajectory &tr = b.trajectories[i];
        tr.input = starts[i];
        const double r0 = std::hypot(starts[i][0], starts[i][1]);
        for (std::size_t k = 0; k <= steps; ++k)
            tr.observations.push_back({r0 * std::exp(-static_cast<double>(k) * cfg.dt)});
    });
    return b;
}

RealVector pde_profile(double kappa, double t, std::size_t nx, double transport) {
    using cd = std::complex<double>;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double n = static_cast<double>(nx);
    auto x = [&](std::size_t j) { return -0.5 + static_cast<double>(j) / n; };

    // Discrete Fourier coefficients of the sampled initial condition.
    const long half = static_cast<long>(nx / 2);
    std::vector<cd> coef(nx);
    for (long k = -half + 1; k <= half; ++k) {
        cd s = 0.0;
        for (std::size_t j = 0; j < nx; ++j) {
            const double xj = x(j);
            s += std::exp(-25.0 * xj * xj) * std::exp(cd(0.0, -two_pi * static_cast<double>(k) * xj));
        }
        coef[static_cast<std::size_t>(k + half - 1)] = s / n;
    }

    RealVector u(nx, 0.0);
    for (long k = -half + 1; k <= half; ++k) {
        const double w = two_pi * static_cast<double>(k);
        const double decay = std::exp(-kappa * w * w * t);
        const cd c = coef[static_cast<std::size_t>(k + half - 1)] * decay;
        for (std::size_t j = 0; j < nx; ++j) {
            const double arg = w * (x(j) - transport * t);
            // The Nyquist mode is split evenly between +-k, which leaves a cosine.
            u[j] += k == half ? c.real() * std::cos(arg) : (c * std::exp(cd(0.0, arg))).real();
        }
    }
    return u;
}

TrajectoryBundle gen_transport_diffusion(const PdeConfig &cfg) {
    if (cfg.nx < 16 || cfg.nx % 2) throw Error(ErrorCode::invalid_argument, "nx must be even and >= 16");
    if (cfg.c_values.empty() || cfg.d_values.empty())
        throw Error(ErrorCode::invalid_argument, "need at least one c and one d value");
    for (double d : cfg.d_values)
        if (d == 0.0) throw Error(ErrorCode::invalid_argument, "d = 0 is not allowed (the equation degenerates)");
    for (double c : cfg.c_values)
        for (double d : cfg.d_values)
            if (c / d < 0.0) throw Error(ErrorCode::invalid_argument, "c/d must be nonnegative (backward diffusion)");
    const std::size_t steps = step_count(cfg.dt, cfg.t_end);

    TrajectoryBundle b;
    b.dt = cfg.dt;
    b.n0 = 2;
    b.m = cfg.nx;
    b.meta = {{"generator", "transport_diffusion"}, {"nx", std::to_string(cfg.nx)},
              {"t_end", format_real(cfg.t_end)}, {"transport_factor", format_real(cfg.transport_factor)}};
    std::vector<std::pair<double, double>> pairs;
    for (double c : cfg.c_values)
        for (double d : cfg.d_values) pairs.emplace_back(c, d);
    b.trajectories.resize(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
        const auto [c, d] = pairs[i];
        Trajectory &tr = b.trajectories[i];
        tr.input = {c, d};
        for (std::size_t k = 0; k <= steps; ++k)
            tr.observations.push_back(pde_profile(c / d, static_cast<double>(k) * cfg.dt, cfg.nx, cfg.transport_factor));
    });
    return b;
}

std::vector<RealVector> egress_run(const EgressConfig &cfg, long N_T0, long N_P0, std::uint64_t pair_index,
                                   std::uint64_t run_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(pair_index), static_cast<std::uint32_t>(run_index)};
    std::mt19937_64 rng(seq);
    long nt = N_T0, np = N_P0;
    std::vector<RealVector> out;
    out.reserve(cfg.duration + 1);
    out.push_back({static_cast<double>(nt), static_cast<double>(np)});
    for (std::size_t s = 0; s < cfg.duration; ++s) {
        long flow = 0;
        if (nt > 0) {
            const double rate =
                cfg.door_rate_base / (1.0 + cfg.congestion_coefficient * static_cast<double>(np) / cfg.platform_capacity);
            std::poisson_distribution<long> pois(rate);
            flow = std::min(nt, pois(rng));
        }
        nt -= flow;
        np += flow;
        out.push_back({static_cast<double>(nt), static_cast<double>(np)});
    }
    return out;
}

TrajectoryBundle gen_egress(const EgressConfig &cfg) {
    if (cfg.N_T0_values.empty() || cfg.N_P0_values.empty())
        throw Error(ErrorCode::invalid_argument, "egress grid is empty");
    for (long v : cfg.N_T0_values)
        if (v < 0) throw Error(ErrorCode::invalid_argument, "passenger counts must be >= 0");
    for (long v : cfg.N_P0_values)
        if (v < 0) throw Error(ErrorCode::invalid_argument, "passenger counts must be >= 0");
    if (cfg.runs_per_pair < 1) throw Error(ErrorCode::invalid_argument, "runs_per_pair must be >= 1");
    if (cfg.duration < 1) throw Error(ErrorCode::invalid_argument, "duration must be >= 1 s");
    if (!(cfg.door_rate_base > 0.0) || cfg.congestion_coefficient < 0.0 || !(cfg.platform_capacity > 0.0))
        throw Error(ErrorCode::invalid_argument, "egress rates must be positive");

    TrajectoryBundle b;
    b.dt = 1.0;
    b.n0 = 2;
    b.m = 2;
    b.meta = {{"generator", "egress"},
              {"seed", std::to_string(cfg.seed)},
              {"runs_per_pair", std::to_string(cfg.runs_per_pair)},
              {"door_rate_base", format_real(cfg.door_rate_base)},
              {"congestion_coefficient", format_real(cfg.congestion_coefficient)},
              {"platform_capacity", format_real(cfg.platform_capacity)}};
    std::vector<std::pair<long, long>> pairs;
    for (long t : cfg.N_T0_values)
        for (long p : cfg.N_P0_values) pairs.emplace_back(t, p);
    b.trajectories.resize(pairs.size() * cfg.runs_per_pair);
    parallel_for(b.trajectories.size(), [&](std::size_t i) {
        const std::size_t pair = i / cfg.runs_per_pair, run = i % cfg.runs_per_pair;
        Trajectory &tr = b.trajectories[i];
        tr.input = {static_cast<double>(pairs[pair].first), static_cast<double>(pairs[pair].second)};
        tr.observations = egress_run(cfg, pairs[pair].first, pairs[pair].second, pair, run);
    });
    return b;
}

} // namespace closedobs

#pragma once

#include "closedobs/generators.hpp"
#include "closedobs/model.hpp"
#include "closedobs/timeseries.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

namespace closedobs {

// ---------------------------------------------------------------------------
// Storage accounting for full-grid interpolants.

struct StorageAccount {
    std::uint64_t d = 0, m = 0, n0 = 0, N = 0;
    std::uint64_t new_model_nodes = 0; // (d+m) N^d + d N^{n0}
    std::uint64_t naive_nodes = 0;     // m N^{n0+1}
    double ratio = 0.0;                // naive / new
    bool reduction_holds = false;      // d < n0 + 1
};

/// Throws Error(invalid_argument) for zero arguments or if a count overflows 64 bits.
StorageAccount storage_account(std::uint64_t d, std::uint64_t m, std::uint64_t n0, std::uint64_t N);

/// Nodes of the full tensor grid {0, 1/(N-1), ..., 1}^p, row-wise.
std::vector<std::vector<double>> full_grid(std::size_t p, std::size_t N);

// ---------------------------------------------------------------------------
// Error-bound audit on the synthetic contraction G(phi) = M phi (d = 1).

struct BoundAuditConfig {
    double M = 0.5;
    double e_G = 0.0, e_phi = 0.0, e_y = 0.0;
    std::size_t n_max = 50;
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
};

struct BoundAudit {
    BoundAuditConfig config;
    std::vector<double> observed; // max deviation over trials, per n
    std::vector<double> bound;    // C1 S_n e_G + C2 M^n e_phi + C3 e_y with fitted constants
    double C1 = 1.0, C2 = 1.0, C3 = 1.0;
    bool satisfied = false;
};

BoundAudit bound_audit(const BoundAuditConfig &cfg);

// ---------------------------------------------------------------------------
// Convergence of the spiral pipeline as the training sampling is refined.

struct ConvergenceConfig {
    std::vector<std::size_t> step_counts{10, 20, 40, 100}; // steps between t=0 and t_final
    std::vector<Scheme> schemes{Scheme::one_sided, Scheme::central};
    double t_final = 2.0;
    double y_lo = 1.0, y_hi = 3.0;  // A0 = {(0, y) | y_lo <= y <= y_hi}
    // Training covers [y_lo/(1+margin), y_hi*(1+margin)] so the flat ends of the
    // diffusion coordinate stay outside the evaluated region.
    double margin = 0.3;
    std::size_t samples = 1000;     // random initial values for the error maximum
    std::uint64_t seed = 1;
    Integrator integrator = Integrator::rk4;
    ModelConfig model;              // scheme is overridden per run
};

struct ConvergencePoint {
    Scheme scheme = Scheme::one_sided;
    std::size_t steps = 0;
    double dt = 0.0;
    double max_error = 0.0;
    std::size_t d = 0;
};

struct ConvergenceResult {
    std::vector<ConvergencePoint> points;
    std::map<Scheme, double> slope; // least-squares slope of log(error) vs log(dt)
};

/// Gaussian RBF with local widths for all three interpolants.
ConvergenceConfig default_convergence_config();
ConvergenceResult convergence_study(const ConvergenceConfig &cfg);

/// Least-squares slope of log(y) against log(x); needs >= 3 finite positive points.
double loglog_slope(const std::vector<double> &x, const std::vector<double> &y);

// ---------------------------------------------------------------------------
// Prediction error against reference trajectories.

/// max_i |O_i - P_i| / max_i |O_i|, or 0 when both vectors vanish.
double relative_error(const Eigen::VectorXd &observed, const Eigen::VectorXd &predicted);

struct HoldoutResult {
    std::vector<std::vector<double>> series; // per truth trajectory, error per compared step
    std::vector<double> max_error;           // per truth trajectory
    double overall_max = 0.0;
    std::size_t extrapolated_steps = 0;
};

/// Simulates from every truth input and compares steps 0..L-1-exclude_tail.
HoldoutResult holdout_error(const NumericalModel &model, const TrajectoryBundle &truth, std::size_t exclude_tail = 0,
                            Integrator integrator = Integrator::iterate);

/// Training reproduction: holdout_error on the training bundle, ignoring the final T steps.
HoldoutResult training_reproduction(const NumericalModel &model, const TrajectoryBundle &training);

// ---------------------------------------------------------------------------
// Egress chance-of-exit analysis.

/// c(n) = 1 - min_{t<=n} max(N_T(t), 0) / N_T0.
double exit_chance(const std::vector<double> &train_counts, double N_T0, std::size_t n);

struct EgressAnalysisConfig {
    std::vector<std::size_t> horizons{25, 50};
    std::vector<double> N_T0_grid;
    std::vector<double> N_P0_grid;
};

struct ChancePoint {
    double N_T0 = 0.0, N_P0 = 0.0;
    std::vector<double> chance; // per horizon
    bool clamped = false;       // a predicted N_T went negative
    double conservation_error = 0.0; // max |N_T + N_P - (N_T0 + N_P0)| along the prediction
};

struct EgressAnalysis {
    std::vector<std::size_t> horizons;
    std::vector<ChancePoint> points; // N_T0-major order
    std::size_t clamped_count = 0;
    double max_conservation_error = 0.0;

    /// Largest increase of c(horizon) along increasing N_P0 at fixed N_T0 (0 if monotone).
    double monotonicity_violation(std::size_t horizon_index) const;
};

EgressAnalysis egress_analysis(const NumericalModel &model, const EgressAnalysisConfig &cfg);

std::vector<double> linspace(double lo, double hi, std::size_t n);

// ---------------------------------------------------------------------------
// Reference configurations shared by the acceptance suite, benchmarks and CLI presets.

struct PdeStudy {
    PdeConfig generator;   // 3x3 (c, d) grid, dt = 0.005 up to t = 0.15
    ModelConfig model;     // T = 5, eps = 2 x median, gaussian RBF input map
    RealVector holdout{1.6, 2.0};
};
PdeStudy reference_pde_study();

/// T = 15, eps = 8 x median, pruning resolution 0.02, standardized polyharmonic
/// interpolants (r^2 log r for the input map, r for the dynamic and observer).
ModelConfig reference_egress_model();

/// 20 x 20 grid over [10, 50] x [0, 200], horizons 25 s and 50 s.
EgressAnalysisConfig reference_egress_analysis();

} // namespace closedobs

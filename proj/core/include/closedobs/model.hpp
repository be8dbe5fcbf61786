#pragma once

#include "closedobs/dmaps.hpp"
#include "closedobs/interp.hpp"
#include "closedobs/timeseries.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace closedobs {

enum class Scheme { one_sided, central };
enum class Integrator {
    iterate, // phi_{n+1} = phi_n + dG(phi_n); exact on training nodes
    rk4,     // treat dG/dt as a vector field and take classical RK4 steps of size dt
};

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string &name);
std::string to_string(Integrator i);
Integrator integrator_from_string(const std::string &name);

struct ModelConfig {
    std::size_t T = 5;
    DmapsConfig dmaps;
    InterpSpec input_interp;
    InterpSpec dynamic_interp;
    InterpSpec observer_interp;
    Scheme scheme = Scheme::one_sided;
    double extrapolation_factor = 3.0; // flag evals farther than this many median node spacings
};

struct BuildStats {
    std::uint64_t bundle_hash = 0;
    std::size_t trajectories = 0;
    std::size_t delay_vectors = 0;
    std::size_t distinct_vectors = 0;
    std::size_t dynamic_nodes = 0;
    double epsilon = 0.0;
    double false_neighbors = 0.0;
    double increment_conflict = 0.0; // largest spread of increments merged at one node
    double lipschitz = 0.0;          // max |G(a)-G(b)|/|a-b| over dynamic node pairs
};

// The deployable triple (phi_I, dG_I, y_I) plus the metadata needed to run it.
struct NumericalModel {
    Interpolant input_map; // R^{n0} -> R^d
    Interpolant dynamic;   // R^d -> R^d, increments
    Interpolant observer;  // R^d -> R^m
    std::size_t T = 0, d = 0, m = 0, n0 = 0;
    double dt = 0.0;
    Scheme scheme = Scheme::one_sided;
    ModelConfig config;
    std::vector<double> eigenvalues;       // leading part of the spectrum, lambda_1 first
    std::vector<std::size_t> kept_indices; // positions in that spectrum
    BuildStats stats;
};

struct SimulationResult {
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> observations;
    std::vector<bool> extrapolated;

    std::size_t extrapolated_steps() const;
};

NumericalModel build_model(const TrajectoryBundle &bundle, const ModelConfig &config);

SimulationResult simulate(const NumericalModel &model, const RealVector &x0, std::size_t n_steps,
                          Integrator integrator = Integrator::iterate);

void save_model(const NumericalModel &model, const std::string &path);
NumericalModel load_model(const std::string &path);

/// The full build configuration as compact JSON (as embedded in model files).
std::string model_config_to_json(const ModelConfig &config);
ModelConfig model_config_from_json(const std::string &text);

constexpr int kModelFormatVersion = 1;

} // namespace closedobs

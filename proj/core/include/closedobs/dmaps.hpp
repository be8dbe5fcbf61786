#pragma once

#include "closedobs/embedding.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace closedobs {

// Bandwidth of the Gaussian kernel W_ij = exp(-d_ij^2 / eps^2). An explicit
// epsilon (> 0) wins; otherwise eps = median of nonzero distances * median_factor.
struct KernelConfig {
    double epsilon = 0.0;
    double median_factor = 1.0;
};

enum class PruningRule {
    // Keep u_k only if it makes the coordinate map more injective: the fraction
    // of points whose nearest neighbour in coordinate space is not among their
    // `neighbors` nearest ambient neighbours must drop noticeably.
    neighbor_injectivity,
    // Prune u_k when a local linear regression on the kept coordinates explains
    // it (normalized leave-one-out residual < dependency_residual).
    local_regression,
};

struct TruncationConfig {
    double lambda_ratio = 1e-3;
    double dependency_residual = 0.05;
    PruningRule rule = PruningRule::neighbor_injectivity;
    std::size_t neighbors = 10;
    std::size_t max_candidates = 12;
    double injectivity_tolerance = 0.01; // stop once the false-neighbour fraction is below this
    double injectivity_gain = 0.2;       // minimum relative reduction to accept a coordinate
    double resolution = 0.1;             // ambient gaps below resolution*eps never count as false
};

struct DmapsConfig {
    KernelConfig kernel;
    TruncationConfig truncation;
    std::size_t landmark_stride = 1;
    double merge_tolerance = 1e-12;
};

struct CandidateReport {
    std::size_t index = 0;      // position in the eigenvalue list (0 = trivial pair)
    double eigenvalue = 0.0;
    double regression_residual = 0.0;
    double false_neighbors = -1.0; // fraction after tentatively adding; -1 if not evaluated
    bool kept = false;
    std::string reason;
};

struct DiffusionCoordinates {
    double epsilon = 0.0;
    Eigen::VectorXd eigenvalues;           // all pairs, sorted by decreasing |lambda|
    std::vector<std::size_t> kept_indices; // indices into eigenvalues, in kept order
    Eigen::MatrixXd coordinates;           // row i = (u_k(i)) over kept k
    Eigen::MatrixXd nodes;                 // ambient points matching coordinate rows (may be empty)
    std::vector<CandidateReport> candidates;
    double false_neighbors = 0.0;          // fraction for the final kept set
    bool degenerate = false;               // d == 0

    std::size_t d() const { return kept_indices.size(); }
    double kept_eigenvalue(std::size_t j) const { return eigenvalues(static_cast<Eigen::Index>(kept_indices[j])); }
};

/// Euclidean distances between the rows of `points`.
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd &points);
Eigen::MatrixXd pairwise_distances(const DelayVectorSet &set);

double resolve_epsilon(const Eigen::MatrixXd &dist, const KernelConfig &kernel);

/// Kernel, normalization, symmetric eigensolve, lambda truncation, and pruning.
/// Requires a symmetric distance matrix with zero diagonal and >= 3 points.
DiffusionCoordinates build_coordinates(const Eigen::MatrixXd &dist, const KernelConfig &kernel,
                                       const TruncationConfig &truncation);

/// Out-of-sample coordinates: sum_i w_i u_k(i) / (lambda_k sum_i w_i).
/// Throws Error(extrapolation) when every kernel weight underflows.
Eigen::VectorXd nystrom_extend(const DiffusionCoordinates &coords, const Eigen::VectorXd &query);

// Diffusion map over a delay vector set. Exact duplicates are merged before the
// eigensolve; with landmark_stride > 1 only every stride-th distinct vector
// enters the eigensolve and the rest are placed by Nystrom extension.
struct DiffusionMap {
    DiffusionCoordinates coords;
    std::vector<std::size_t> distinct_of_row; // delay-vector row -> distinct index
    Eigen::MatrixXd distinct_points;          // ambient distinct vectors
    Eigen::MatrixXd distinct_coordinates;     // coordinates of each distinct vector

    std::size_t d() const { return coords.d(); }
    Eigen::VectorXd row_coordinates(std::size_t row) const {
        return distinct_coordinates.row(static_cast<Eigen::Index>(distinct_of_row[row])).transpose();
    }
};

DiffusionMap diffusion_map(const DelayVectorSet &set, const DmapsConfig &config);

struct EmbeddingScanEntry {
    std::size_t T = 0;
    std::vector<double> eigenvalues; // leading nontrivial eigenvalues
    std::size_t d = 0;
};

struct EmbeddingScan {
    std::vector<EmbeddingScanEntry> entries;
    std::size_t stable_T = 0; // smallest T after which d(T) no longer changes
};

EmbeddingScan embedding_scan(const TrajectoryBundle &bundle, const std::vector<std::size_t> &Ts,
                             const DmapsConfig &config);

} // namespace closedobs

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace closedobs {

using RealVector = std::vector<double>;

// One observation sequence y_0..y_{L-1}, labelled by the input (initial state or
// parameters) that produced it. Times are implicit: t_k = k * dt.
struct Trajectory {
    RealVector input;
    std::vector<RealVector> observations;

    std::size_t length() const { return observations.size(); }
};

struct TrajectoryBundle {
    double dt = 1.0;
    std::size_t n0 = 0; // input dimension
    std::size_t m = 0;  // observation dimension
    std::vector<Trajectory> trajectories;
    std::map<std::string, std::string> meta;

    /// Throws Error(inconsistent_data / invalid_argument) if any invariant fails:
    /// dt > 0, >= 1 trajectory, >= 2 observations each, matching n0/m, finite values.
    void validate() const;
};

enum class BundleFormat { csv, json };

/// Picks the format from the file extension (".json" -> json, otherwise csv).
BundleFormat format_from_path(const std::string &path);

TrajectoryBundle load_bundle(const std::string &path, BundleFormat format);
TrajectoryBundle load_bundle(const std::string &path);
void save_bundle(const TrajectoryBundle &bundle, const std::string &path, BundleFormat format);
void save_bundle(const TrajectoryBundle &bundle, const std::string &path);

/// Averages trajectories whose inputs agree componentwise within `tolerance`.
/// Groups appear in order of first occurrence; meta is carried over.
TrajectoryBundle average_runs(const TrajectoryBundle &bundle, double tolerance = 1e-9);

/// FNV-1a 64-bit digest of dt, dimensions, inputs and observations (not meta).
std::uint64_t bundle_hash(const TrajectoryBundle &bundle);

/// Shortest decimal form that parses back to the same double.
std::string format_real(double value);

} // namespace closedobs

#pragma once

#include "closedobs/timeseries.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace closedobs {

struct DelaySource {
    std::size_t trajectory;
    std::size_t k;
};

// Forward delay vectors h_k = (y_k, ..., y_{k+T-1}), stored row-wise and
// interleaved block-by-time: row i = [y_k; y_{k+1}; ...].
struct DelayVectorSet {
    std::size_t T = 0;
    std::size_t m = 0;
    double dt = 0.0;
    Eigen::MatrixXd values;               // rows = vectors, cols = T*m
    std::vector<DelaySource> source;      // back-reference per row
    std::vector<std::ptrdiff_t> successor; // row of (same trajectory, k+1), or -1
    std::vector<std::size_t> first_row;   // first row of each trajectory

    std::size_t size() const { return source.size(); }
    std::size_t width() const { return T * m; }
    Eigen::VectorXd vector(std::size_t i) const { return values.row(static_cast<Eigen::Index>(i)).transpose(); }
};

/// Builds all forward delay vectors. Every trajectory must have at least T+1
/// observations; otherwise throws Error(too_short) naming the trajectory index.
DelayVectorSet delay_embed(const TrajectoryBundle &bundle, std::size_t T);

} // namespace closedobs

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>

namespace closedobs {

enum class InterpMethod { nearest, shepard, rbf_gaussian, polyharmonic };

std::string to_string(InterpMethod method);
InterpMethod interp_method_from_string(const std::string &name);

struct InterpSpec {
    InterpMethod method = InterpMethod::shepard;
    std::size_t k = 0;    // shepard neighbours; 0 means min(2(p+1), node count)
    double power = 2.0;   // shepard inverse-distance power
    double shape = 1.0;   // rbf width in units of the mean nearest-node spacing
    double ridge = 1e-10; // rbf / polyharmonic diagonal regularization
    double width = 0.0;   // rbf absolute kernel width; overrides shape when > 0
    bool local_width = false; // rbf: per-node width = shape * mean distance to the p+1 nearest nodes
    int order = 1;            // polyharmonic kernel: 1 -> r, 2 -> r^2 log r, 3 -> r^3
    bool standardize = false; // measure distances after dividing each input axis by its node spread
};

struct InterpEval {
    Eigen::VectorXd value;
    double nearest_distance = 0.0; // distance from the query to the closest node (standardized axes)
};

// Scattered-data interpolant R^p -> R^q. Nodes closer than 1e-12 (max-norm)
// are merged by averaging their values; conflicting duplicates (spread > 1e-6)
// are rejected. The kernel methods carry an affine polynomial tail over the
// span of the nodes, so affine data are reproduced exactly.
class Interpolant {
  public:
    static Interpolant fit(const Eigen::MatrixXd &nodes, const Eigen::MatrixXd &values,
                           const InterpSpec &spec = {});

    Eigen::VectorXd eval(const Eigen::VectorXd &query) const;
    InterpEval eval_detailed(const Eigen::VectorXd &query) const;

    const Eigen::MatrixXd &nodes() const { return nodes_; }
    const Eigen::MatrixXd &values() const { return values_; }
    const InterpSpec &spec() const { return spec_; }
    std::size_t p() const { return static_cast<std::size_t>(nodes_.cols()); }
    std::size_t q() const { return static_cast<std::size_t>(values_.cols()); }
    std::size_t size() const { return static_cast<std::size_t>(nodes_.rows()); }
    std::size_t merged_duplicates() const { return merged_; }
    /// Median distance from a node to its nearest other node (0 for one node).
    double median_spacing() const { return median_spacing_; }
    /// Per-axis factors applied to nodes and queries before distances (ones unless standardized).
    const Eigen::VectorXd &axis_scale() const { return axis_scale_; }

    // Kernel internals (rbf_gaussian and polyharmonic), exposed for serialization.
    struct RbfState {
        double scale = 1.0;          // gaussian width h (mean width when widths is set)
        Eigen::VectorXd widths;      // per-node widths for local_width fits, else empty
        Eigen::MatrixXd weights;     // n x q kernel coefficients
        Eigen::VectorXd center;      // tail origin
        Eigen::MatrixXd directions;  // p x r orthonormal tail directions
        Eigen::MatrixXd tail;        // (1+r) x q polynomial coefficients
    };
    const RbfState &rbf() const { return rbf_; }

    /// Reassembles a fitted interpolant without refitting (used by model loading).
    static Interpolant from_parts(Eigen::MatrixXd nodes, Eigen::MatrixXd values, InterpSpec spec,
                                  RbfState rbf, double median_spacing, Eigen::VectorXd axis_scale = {});

  private:
    Eigen::MatrixXd nodes_, values_;
    Eigen::MatrixXd work_; // nodes_ with axis_scale_ applied
    Eigen::VectorXd axis_scale_;
    InterpSpec spec_;
    RbfState rbf_;
    std::size_t merged_ = 0;
    double median_spacing_ = 0.0;

    std::size_t neighbor_count() const;
    bool kernel_method() const;
};

/// Leave-one-out estimate of the maximum interpolation error (max-norm over the
/// value components, maximized over nodes). Kernel methods use Rippa's closed
/// form with the widths of the full fit; the other methods refit explicitly.
double loo_error(const Eigen::MatrixXd &nodes, const Eigen::MatrixXd &values, const InterpSpec &spec = {});

} // namespace closedobs

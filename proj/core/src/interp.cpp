#include "closedobs/interp.hpp"

#include "closedobs/error.hpp"
#include "closedobs/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <cstdio>
#include <vector>

namespace closedobs {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(InterpMethod method) {
    switch (method) {
    case InterpMethod::nearest: return "nearest";
    case InterpMethod::shepard: return "shepard";
    case InterpMethod::rbf_gaussian: return "rbf_gaussian";
    case InterpMethod::polyharmonic: return "polyharmonic";
    }
    return "unknown";
}

InterpMethod interp_method_from_string(const std::string &name) {
    if (name == "nearest") return InterpMethod::nearest;
    if (name == "shepard") return InterpMethod::shepard;
    if (name == "rbf_gaussian" || name == "rbf") return InterpMethod::rbf_gaussian;
    if (name == "polyharmonic" || name == "phs") return InterpMethod::polyharmonic;
    throw Error(ErrorCode::invalid_argument, "unknown interpolation method '" + name + "'");
}

namespace {

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

constexpr double kDuplicateTol = 1e-12;
constexpr double kConflictTol = 1e-6;
constexpr double kKernelCutoff = 40.0; // exp(-40) ~ 4e-18 relative to the peak

struct Merged {
    MatrixXd nodes, values;
    std::size_t merged = 0;
};

Merged merge_duplicates(const MatrixXd &nodes, const MatrixXd &values) {
    const Index n = nodes.rows(), p = nodes.cols();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        for (Index c = 0; c < p; ++c)
            if (nodes(a, c) != nodes(b, c)) return nodes(a, c) < nodes(b, c);
        return false;
    });
    std::vector<Index> group(static_cast<std::size_t>(n));
    for (std::size_t a = 0; a < order.size(); ++a) {
        const Index i = order[a];
        group[static_cast<std::size_t>(i)] = i;
        if (a > 0) {
            const Index g = group[static_cast<std::size_t>(order[a - 1])];
            if ((nodes.row(i) - nodes.row(g)).cwiseAbs().maxCoeff() <= kDuplicateTol)
                group[static_cast<std::size_t>(i)] = g;
        }
    }
    // Keep first-appearance order of groups so fits are order-stable.
    std::vector<Index> slot(static_cast<std::size_t>(n), -1);
    std::vector<std::vector<Index>> members;
    for (Index i = 0; i < n; ++i) {
        Index &s = slot[static_cast<std::size_t>(group[static_cast<std::size_t>(i)])];
        if (s < 0) {
            s = static_cast<Index>(members.size());
            members.emplace_back();
        }
        members[static_cast<std::size_t>(s)].push_back(i);
    }
    Merged out;
    out.nodes.resize(static_cast<Index>(members.size()), p);
    out.values.resize(static_cast<Index>(members.size()), values.cols());
    for (std::size_t g = 0; g < members.size(); ++g) {
        const auto &mem = members[g];
        out.nodes.row(static_cast<Index>(g)) = nodes.row(mem.front());
        VectorXd sum = VectorXd::Zero(values.cols());
        VectorXd lo = values.row(mem.front()).transpose(), hi = lo;
        for (Index i : mem) {
            sum += values.row(i).transpose();
            lo = lo.cwiseMin(values.row(i).transpose());
            hi = hi.cwiseMax(values.row(i).transpose());
        }
        if (values.cols() > 0 && (hi - lo).maxCoeff() > kConflictTol)
            throw Error(ErrorCode::duplicate_conflict,
                        "duplicate interpolation nodes (rows " + std::to_string(mem.front()) + " and " +
                            std::to_string(mem.back()) + ") carry values differing by " +
                            sci((hi - lo).maxCoeff()));
        out.values.row(static_cast<Index>(g)) = (sum / static_cast<double>(mem.size())).transpose();
        out.merged += mem.size() - 1;
    }
    return out;
}

std::vector<double> nearest_node_distances(const MatrixXd &nodes) {
    const std::size_t n = static_cast<std::size_t>(nodes.rows());
    std::vector<double> nn(n, 0.0);
    if (n < 2) return nn;
    parallel_for(n, [&](std::size_t i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i)
                best = std::min(best, (nodes.row(static_cast<Index>(i)) - nodes.row(static_cast<Index>(j))).squaredNorm());
        nn[i] = std::sqrt(best);
    });
    return nn;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
    return m;
}

// Affine tail restricted to the directions the nodes actually span, so
// collinear or coplanar node sets do not make the saddle system singular.
void tail_basis(const MatrixXd &nodes, Interpolant::RbfState &st) {
    const Index n = nodes.rows(), p = nodes.cols();
    st.center = nodes.colwise().mean().transpose();
    if (n < 2) {
        st.directions = MatrixXd::Zero(p, 0);
        return;
    }
    const MatrixXd X = nodes.rowwise() - st.center.transpose();
    Eigen::JacobiSVD<MatrixXd> svd(X, Eigen::ComputeThinV);
    const VectorXd &s = svd.singularValues();
    const double smax = s.size() ? s(0) : 0.0;
    Index r = 0;
    while (r < s.size() && smax > 0.0 && s(r) > 1e-10 * smax) ++r;
    r = std::min<Index>(r, n - 1); // leave room in the saddle system
    const double extent = smax > 0.0 ? smax / std::sqrt(static_cast<double>(n)) : 1.0;
    st.directions = svd.matrixV().leftCols(r) / extent;
}

MatrixXd tail_matrix(const MatrixXd &nodes, const Interpolant::RbfState &st) {
    MatrixXd P(nodes.rows(), 1 + st.directions.cols());
    P.col(0).setOnes();
    P.rightCols(st.directions.cols()) = (nodes.rowwise() - st.center.transpose()) * st.directions;
    return P;
}

double rbf_width(const std::vector<double> &nn, const InterpSpec &spec) {
    if (spec.width > 0.0) return spec.width;
    double mean = 0.0;
    for (double v : nn) mean += v;
    mean = nn.empty() ? 0.0 : mean / static_cast<double>(nn.size());
    const double h = spec.shape * mean;
    return h > 0.0 ? h : 1.0;
}

double polyharmonic(double d2, int order) {
    if (d2 <= 0.0) return 0.0;
    switch (order) {
    case 1: return std::sqrt(d2);
    case 2: return 0.5 * d2 * std::log(d2); // r^2 log r
    default: return d2 * std::sqrt(d2);
    }
}

// Radial kernel; for gaussians column j uses the width of node j.
struct Kernel {
    InterpMethod method = InterpMethod::rbf_gaussian;
    int order = 1;
    VectorXd inv_w2; // 1 / w_j^2 (gaussian only)

    double operator()(double d2, Index j) const {
        return method == InterpMethod::polyharmonic ? polyharmonic(d2, order) : std::exp(-d2 * inv_w2(j));
    }
};

Kernel make_kernel(const InterpSpec &spec, const Interpolant::RbfState &st, Index n) {
    Kernel k;
    k.method = spec.method;
    k.order = spec.order;
    if (spec.method == InterpMethod::rbf_gaussian)
        k.inv_w2 = (st.widths.size() ? st.widths : VectorXd::Constant(n, st.scale)).array().square().inverse();
    return k;
}

MatrixXd kernel_matrix(const MatrixXd &nodes, const Kernel &kernel, double ridge) {
    const Index n = nodes.rows();
    MatrixXd K(n, n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t ui) {
        const Index i = static_cast<Index>(ui);
        for (Index j = 0; j < n; ++j) K(i, j) = kernel((nodes.row(i) - nodes.row(j)).squaredNorm(), j);
        K(i, i) += ridge;
    });
    return K;
}

MatrixXd saddle_matrix(const MatrixXd &A, const MatrixXd &P) {
    const Index n = A.rows(), r = P.cols();
    MatrixXd M = MatrixXd::Zero(n + r, n + r);
    M.topLeftCorner(n, n) = A;
    M.topRightCorner(n, r) = P;
    M.bottomLeftCorner(r, n) = P.transpose();
    return M;
}

[[noreturn]] void throw_residual(double res, double ridge) {
    if (!std::isfinite(res))
        throw Error(ErrorCode::singular_system,
                    "rbf system is singular at ridge " + sci(ridge) + "; retry with a larger ridge");
    throw Error(ErrorCode::singular_system, "rbf system residual " + sci(res) + " exceeds 1e-8 at ridge " +
                                                sci(ridge) + "; retry with a larger ridge or smaller shape");
}

// Uniform width: symmetric kernel, LDLT plus a Schur complement for the tail.
void solve_symmetric(const MatrixXd &A, const MatrixXd &P, const MatrixXd &values, double ridge,
                     Interpolant::RbfState &st) {
    Eigen::LDLT<MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success)
        throw Error(ErrorCode::singular_system, "rbf kernel factorization failed; increase the ridge");
    const MatrixXd AiY = ldlt.solve(values);
    const MatrixXd AiP = ldlt.solve(P);
    const MatrixXd S = P.transpose() * AiP;
    Eigen::ColPivHouseholderQR<MatrixXd> sq(S);
    st.tail = sq.solve(P.transpose() * AiY);
    st.weights = ldlt.solve(values - P * st.tail);

    // A couple of refinement sweeps on the full saddle system.
    const double yscale = std::max(1.0, values.cwiseAbs().maxCoeff());
    for (int it = 0; it < 3; ++it) {
        const MatrixXd r1 = values - A * st.weights - P * st.tail;
        const MatrixXd r2 = -P.transpose() * st.weights;
        const double res = std::max(r1.cwiseAbs().maxCoeff(), r2.size() ? r2.cwiseAbs().maxCoeff() : 0.0);
        if (!std::isfinite(res)) throw_residual(res, ridge);
        if (res < 1e-8 * yscale) return;
        const MatrixXd dt = sq.solve(P.transpose() * ldlt.solve(r1) - r2);
        st.tail += dt;
        st.weights += ldlt.solve(r1 - P * dt);
    }
    const double res = (values - A * st.weights - P * st.tail).cwiseAbs().maxCoeff();
    if (!(res < 1e-8 * yscale)) throw_residual(res, ridge);
}

// Per-node widths: nonsymmetric kernel, LU on the whole saddle system.
void solve_general(const MatrixXd &A, const MatrixXd &P, const MatrixXd &values, double ridge,
                   Interpolant::RbfState &st) {
    const Index n = A.rows(), r = P.cols();
    const MatrixXd M = saddle_matrix(A, P);
    MatrixXd rhs = MatrixXd::Zero(n + r, values.cols());
    rhs.topRows(n) = values;
    Eigen::PartialPivLU<MatrixXd> lu(M);
    MatrixXd x = lu.solve(rhs);
    const double yscale = std::max(1.0, values.cwiseAbs().maxCoeff());
    for (int it = 0; it < 4; ++it) {
        const MatrixXd resid = rhs - M * x;
        const double res = resid.cwiseAbs().maxCoeff();
        if (!std::isfinite(res)) throw_residual(res, ridge);
        if (res < 1e-8 * yscale) break;
        x += lu.solve(resid);
    }
    st.weights = x.topRows(n);
    st.tail = x.bottomRows(r);
    const double res = (values - A * st.weights - P * st.tail).cwiseAbs().maxCoeff();
    if (!(res < 1e-8 * yscale)) throw_residual(res, ridge);
}

VectorXd local_widths(const MatrixXd &nodes, double shape) {
    const std::size_t n = static_cast<std::size_t>(nodes.rows());
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(nodes.cols()) + 1, n - 1);
    VectorXd w(static_cast<Index>(n));
    parallel_for(n, [&](std::size_t i) {
        std::vector<double> d;
        d.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) d.push_back((nodes.row(static_cast<Index>(i)) - nodes.row(static_cast<Index>(j))).norm());
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
        const double mean = std::accumulate(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
                            static_cast<double>(k);
        w(static_cast<Index>(i)) = shape * mean;
    });
    return w;
}

Interpolant::RbfState solve_rbf(const MatrixXd &nodes, const MatrixXd &values, const InterpSpec &spec,
                                const std::vector<double> &nn) {
    Interpolant::RbfState st;
    const bool gaussian = spec.method == InterpMethod::rbf_gaussian;
    const bool local = gaussian && spec.local_width && spec.width <= 0.0 && nodes.rows() > 1;
    if (local) {
        st.widths = local_widths(nodes, spec.shape);
        st.scale = st.widths.mean();
    } else {
        st.scale = gaussian ? rbf_width(nn, spec) : 1.0;
    }
    tail_basis(nodes, st);
    const MatrixXd A = kernel_matrix(nodes, make_kernel(spec, st, nodes.rows()), spec.ridge);
    const MatrixXd P = tail_matrix(nodes, st);
    // Only the uniform gaussian matrix is symmetric positive definite.
    if (!gaussian || local)
        solve_general(A, P, values, spec.ridge, st);
    else
        solve_symmetric(A, P, values, spec.ridge, st);
    return st;
}

} // namespace

std::size_t Interpolant::neighbor_count() const {
    const std::size_t n = size();
    if (spec_.method == InterpMethod::nearest) return 1;
    const std::size_t k = spec_.k ? spec_.k : 2 * (p() + 1);
    return std::min(k, n);
}

bool Interpolant::kernel_method() const {
    return spec_.method == InterpMethod::rbf_gaussian || spec_.method == InterpMethod::polyharmonic;
}

namespace {

VectorXd standardizing_scale(const MatrixXd &nodes, bool standardize) {
    VectorXd scale = VectorXd::Ones(nodes.cols());
    if (!standardize || nodes.rows() < 2) return scale;
    for (Index c = 0; c < nodes.cols(); ++c) {
        const double mean = nodes.col(c).mean();
        const double sd = std::sqrt((nodes.col(c).array() - mean).square().mean());
        if (sd > 0.0) scale(c) = 1.0 / sd;
    }
    return scale;
}

} // namespace

Interpolant Interpolant::fit(const MatrixXd &nodes, const MatrixXd &values, const InterpSpec &spec) {
    if (nodes.rows() < 1) throw Error(ErrorCode::invalid_argument, "interpolant needs at least one node");
    if (nodes.rows() != values.rows())
        throw Error(ErrorCode::invalid_argument,
                    "node count " + std::to_string(nodes.rows()) + " != value count " + std::to_string(values.rows()));
    if (!nodes.allFinite() || !values.allFinite())
        throw Error(ErrorCode::invalid_argument, "interpolation data must be finite");
    if (spec.method == InterpMethod::shepard && !(spec.power > 0.0))
        throw Error(ErrorCode::invalid_argument, "shepard power must be positive");
    if (spec.method == InterpMethod::rbf_gaussian && (!(spec.shape > 0.0) || spec.ridge < 0.0))
        throw Error(ErrorCode::invalid_argument, "rbf needs shape > 0 and ridge >= 0");
    if (spec.method == InterpMethod::polyharmonic && (spec.order < 1 || spec.order > 3 || spec.ridge < 0.0))
        throw Error(ErrorCode::invalid_argument, "polyharmonic needs order 1, 2 or 3 and ridge >= 0");

    Merged m = merge_duplicates(nodes, values);
    Interpolant it;
    it.nodes_ = std::move(m.nodes);
    it.values_ = std::move(m.values);
    it.spec_ = spec;
    it.merged_ = m.merged;
    it.axis_scale_ = standardizing_scale(it.nodes_, spec.standardize);
    it.work_ = it.nodes_ * it.axis_scale_.asDiagonal();
    const auto nn = nearest_node_distances(it.work_);
    it.median_spacing_ = median(nn);
    if (it.kernel_method()) it.rbf_ = solve_rbf(it.work_, it.values_, spec, nn);
    return it;
}

Interpolant Interpolant::from_parts(MatrixXd nodes, MatrixXd values, InterpSpec spec, RbfState rbf,
                                    double median_spacing, VectorXd axis_scale) {
    if (nodes.rows() < 1 || nodes.rows() != values.rows())
        throw Error(ErrorCode::corrupt_file, "interpolant parts have inconsistent sizes");
    if (axis_scale.size() == 0) axis_scale = VectorXd::Ones(nodes.cols());
    if (axis_scale.size() != nodes.cols() || !(axis_scale.array() > 0.0).all())
        throw Error(ErrorCode::corrupt_file, "interpolant axis scale is inconsistent");
    const bool kernel = spec.method == InterpMethod::rbf_gaussian || spec.method == InterpMethod::polyharmonic;
    if (kernel &&
        (rbf.weights.rows() != nodes.rows() || rbf.weights.cols() != values.cols() ||
         rbf.center.size() != nodes.cols() || rbf.directions.rows() != nodes.cols() ||
         rbf.tail.rows() != 1 + rbf.directions.cols() || rbf.tail.cols() != values.cols() ||
         (rbf.widths.size() != 0 && rbf.widths.size() != nodes.rows())))
        throw Error(ErrorCode::corrupt_file, "rbf parts have inconsistent sizes");
    Interpolant it;
    it.nodes_ = std::move(nodes);
    it.values_ = std::move(values);
    it.spec_ = spec;
    it.rbf_ = std::move(rbf);
    it.median_spacing_ = median_spacing;
    it.axis_scale_ = std::move(axis_scale);
    it.work_ = it.nodes_ * it.axis_scale_.asDiagonal();
    return it;
}

Eigen::VectorXd Interpolant::eval(const VectorXd &query) const { return eval_detailed(query).value; }

InterpEval Interpolant::eval_detailed(const VectorXd &query) const {
    if (query.size() != nodes_.cols())
        throw Error(ErrorCode::invalid_argument,
                    "query dimension " + std::to_string(query.size()) + " != interpolant dimension " +
                        std::to_string(nodes_.cols()));
    const Index n = nodes_.rows();
    const VectorXd x = query.cwiseProduct(axis_scale_);
    InterpEval out;
    if (kernel_method()) {
        const bool gaussian = spec_.method == InterpMethod::rbf_gaussian;
        const bool local = rbf_.widths.size() != 0;
        const double inv = 1.0 / (rbf_.scale * rbf_.scale);
        double best = std::numeric_limits<double>::infinity();
        out.value = rbf_.tail.row(0).transpose();
        if (rbf_.directions.cols() > 0)
            out.value += rbf_.tail.bottomRows(rbf_.directions.cols()).transpose() *
                         (rbf_.directions.transpose() * (x - rbf_.center));
        for (Index i = 0; i < n; ++i) {
            const double d2 = (work_.row(i).transpose() - x).squaredNorm();
            best = std::min(best, d2);
            if (!gaussian) {
                out.value += polyharmonic(d2, spec_.order) * rbf_.weights.row(i).transpose();
                continue;
            }
            const double z = local ? d2 / (rbf_.widths(i) * rbf_.widths(i)) : d2 * inv;
            if (z < kKernelCutoff) out.value += std::exp(-z) * rbf_.weights.row(i).transpose();
        }
        out.nearest_distance = std::sqrt(best);
        return out;
    }

    // k nearest nodes by insertion into a small sorted buffer.
    const std::size_t k = neighbor_count();
    std::vector<std::pair<double, Index>> buf;
    buf.reserve(k + 1);
    for (Index i = 0; i < n; ++i) {
        const double d2 = (work_.row(i).transpose() - x).squaredNorm();
        if (buf.size() == k && d2 >= buf.back().first) continue;
        auto pos = std::upper_bound(buf.begin(), buf.end(), std::make_pair(d2, i));
        buf.insert(pos, {d2, i});
        if (buf.size() > k) buf.pop_back();
    }
    out.nearest_distance = std::sqrt(buf.front().first);
    if (buf.front().first == 0.0 || spec_.method == InterpMethod::nearest) {
        out.value = values_.row(buf.front().second).transpose();
        return out;
    }
    double wsum = 0.0;
    out.value = VectorXd::Zero(values_.cols());
    for (const auto &[d2, i] : buf) {
        const double w = std::pow(d2, -0.5 * spec_.power);
        wsum += w;
        out.value += w * values_.row(i).transpose();
    }
    out.value /= wsum;
    return out;
}

double loo_error(const MatrixXd &nodes, const MatrixXd &values, const InterpSpec &spec) {
    const Interpolant full = Interpolant::fit(nodes, values, spec);
    const Index n = static_cast<Index>(full.size());
    if (n < 3) throw Error(ErrorCode::invalid_argument, "leave-one-out needs at least 3 distinct nodes");

    if (spec.method == InterpMethod::rbf_gaussian || spec.method == InterpMethod::polyharmonic) {
        // Rippa: e_i = c_i / (M^{-1})_{ii} for the saddle matrix M = [A P; P^T 0].
        const auto &st = full.rbf();
        const MatrixXd work = full.nodes() * full.axis_scale().asDiagonal();
        const MatrixXd A = kernel_matrix(work, make_kernel(spec, st, n), spec.ridge);
        const MatrixXd P = tail_matrix(work, st);
        VectorXd diag(n);
        if (spec.method == InterpMethod::polyharmonic || st.widths.size()) {
            const MatrixXd Minv = Eigen::PartialPivLU<MatrixXd>(saddle_matrix(A, P)).inverse();
            diag = Minv.diagonal().head(n);
        } else {
            Eigen::LDLT<MatrixXd> ldlt(A);
            const MatrixXd Ainv = ldlt.solve(MatrixXd::Identity(n, n));
            const MatrixXd B = Ainv * P;
            const MatrixXd S = P.transpose() * B;
            const MatrixXd SiBt = S.colPivHouseholderQr().solve(B.transpose());
            for (Index i = 0; i < n; ++i) diag(i) = Ainv(i, i) - B.row(i).dot(SiBt.col(i));
        }
        double worst = 0.0;
        for (Index i = 0; i < n; ++i)
            worst = std::max(worst, st.weights.row(i).cwiseAbs().maxCoeff() / std::abs(diag(i)));
        return worst;
    }

    std::vector<double> err(static_cast<std::size_t>(n), 0.0);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t ui) {
        const Index i = static_cast<Index>(ui);
        MatrixXd N(n - 1, full.nodes().cols()), V(n - 1, full.values().cols());
        N << full.nodes().topRows(i), full.nodes().bottomRows(n - 1 - i);
        V << full.values().topRows(i), full.values().bottomRows(n - 1 - i);
        const Interpolant sub = Interpolant::fit(N, V, spec);
        err[ui] = (sub.eval(full.nodes().row(i).transpose()) - full.values().row(i).transpose()).cwiseAbs().maxCoeff();
    });
    return *std::max_element(err.begin(), err.end());
}

} // namespace closedobs

#include "closedobs/dmaps.hpp"

#include "closedobs/error.hpp"
#include "closedobs/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace closedobs {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Indices of the k nearest rows to row i under the given distance callback,
// excluding i itself; ties broken by index.
template <class Dist>
std::vector<std::size_t> nearest(std::size_t n, std::size_t i, std::size_t k, Dist &&dist) {
    std::vector<std::pair<double, std::size_t>> all;
    all.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
        if (j != i) all.emplace_back(dist(j), j);
    k = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
    std::vector<std::size_t> out(k);
    for (std::size_t a = 0; a < k; ++a) out[a] = all[a].second;
    return out;
}

// Fraction of points whose nearest neighbour in coordinate space P is a
// "false" neighbour: outside the ambient neighbourhood and farther away than
// the kernel can resolve.
double false_neighbor_fraction(const MatrixXd &P, const MatrixXd &dist,
                               const std::vector<std::vector<std::size_t>> &ambient, double floor) {
    const std::size_t n = static_cast<std::size_t>(P.rows());
    std::vector<char> bad(n, 0);
    parallel_for(n, [&](std::size_t i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = i;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d2 = (P.row(static_cast<Index>(i)) - P.row(static_cast<Index>(j))).squaredNorm();
            if (d2 < best) {
                best = d2;
                arg = j;
            }
        }
        const auto &nb = ambient[i];
        const bool inside = std::find(nb.begin(), nb.end(), arg) != nb.end();
        bad[i] = !inside && dist(static_cast<Index>(i), static_cast<Index>(arg)) > floor;
    });
    return static_cast<double>(std::count(bad.begin(), bad.end(), 1)) / static_cast<double>(n);
}

// Normalized leave-one-out residual of a local affine regression of u on P.
double regression_residual(const MatrixXd &P, const VectorXd &u, std::size_t neighbors) {
    const std::size_t n = static_cast<std::size_t>(u.size());
    const double mean = u.mean();
    const double denom = (u.array() - mean).square().sum();
    if (denom <= 0.0) return 0.0;
    if (P.cols() == 0) return 1.0;
    VectorXd pred(static_cast<Index>(n));
    parallel_for(n, [&](std::size_t i) {
        auto nb = nearest(n, i, neighbors, [&](std::size_t j) {
            return (P.row(static_cast<Index>(i)) - P.row(static_cast<Index>(j))).squaredNorm();
        });
        MatrixXd A(static_cast<Index>(nb.size()), P.cols() + 1);
        VectorXd b(static_cast<Index>(nb.size()));
        for (std::size_t a = 0; a < nb.size(); ++a) {
            A(static_cast<Index>(a), 0) = 1.0;
            A.row(static_cast<Index>(a)).tail(P.cols()) =
                P.row(static_cast<Index>(nb[a])) - P.row(static_cast<Index>(i));
            b(static_cast<Index>(a)) = u(static_cast<Index>(nb[a]));
        }
        const VectorXd coef = A.completeOrthogonalDecomposition().solve(b);
        pred(static_cast<Index>(i)) = coef(0);
    });
    return std::sqrt((u - pred).squaredNorm() / denom);
}

void fix_sign(Eigen::Ref<VectorXd> v) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < v.size(); ++i)
        if (std::abs(v(i)) > best) {
            best = std::abs(v(i));
            arg = i;
        }
    if (v(arg) < 0.0) v = -v;
}

} // namespace

MatrixXd pairwise_distances(const MatrixXd &points) {
    const Index n = points.rows();
    MatrixXd D = MatrixXd::Zero(n, n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t ui) {
        const Index i = static_cast<Index>(ui);
        for (Index j = i + 1; j < n; ++j) D(i, j) = (points.row(i) - points.row(j)).norm();
    });
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) D(j, i) = D(i, j);
    return D;
}

MatrixXd pairwise_distances(const DelayVectorSet &set) {
    if (set.size() == 0) throw Error(ErrorCode::invalid_argument, "empty delay vector set");
    return pairwise_distances(set.values);
}

double resolve_epsilon(const MatrixXd &dist, const KernelConfig &kernel) {
    if (kernel.epsilon > 0.0) return kernel.epsilon;
    if (!(kernel.median_factor > 0.0))
        throw Error(ErrorCode::invalid_argument, "epsilon median factor must be positive");
    std::vector<double> nz;
    for (Index i = 0; i < dist.rows(); ++i)
        for (Index j = i + 1; j < dist.cols(); ++j)
            if (dist(i, j) > 0.0) nz.push_back(dist(i, j));
    if (nz.empty()) return kernel.median_factor; // all points coincide; any bandwidth works
    auto mid = nz.begin() + static_cast<std::ptrdiff_t>(nz.size() / 2);
    std::nth_element(nz.begin(), mid, nz.end());
    double med = *mid;
    if (nz.size() % 2 == 0) med = 0.5 * (med + *std::max_element(nz.begin(), mid));
    return med * kernel.median_factor;
}

DiffusionCoordinates build_coordinates(const MatrixXd &dist, const KernelConfig &kernel,
                                       const TruncationConfig &tr) {
    const Index n = dist.rows();
    if (n < 3 || dist.cols() != n)
        throw Error(ErrorCode::invalid_argument, "diffusion map needs a square distance matrix over >= 3 points");
    if (!(tr.lambda_ratio > 0.0 && tr.lambda_ratio < 1.0))
        throw Error(ErrorCode::invalid_argument, "lambda_ratio must lie in (0,1)");
    if (!(tr.dependency_residual > 0.0 && tr.dependency_residual < 1.0))
        throw Error(ErrorCode::invalid_argument, "dependency_residual must lie in (0,1)");

    DiffusionCoordinates out;
    out.epsilon = resolve_epsilon(dist, kernel);
    const double eps2 = out.epsilon * out.epsilon;

    MatrixXd W = (-(dist.array().square()) / eps2).exp().matrix();
    const VectorXd N = W.rowwise().sum();
    const VectorXd isq = N.array().rsqrt().matrix();
    MatrixXd S = isq.asDiagonal() * W * isq.asDiagonal();
    S = 0.5 * (S + S.transpose());
    W.resize(0, 0);

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
    if (es.info() != Eigen::Success)
        throw Error(ErrorCode::eigensolver_failure, "symmetric eigensolver did not converge");

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const VectorXd &ev = es.eigenvalues();
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        if (std::abs(ev(a)) != std::abs(ev(b))) return std::abs(ev(a)) > std::abs(ev(b));
        return ev(a) > ev(b);
    });
    out.eigenvalues.resize(n);
    for (Index k = 0; k < n; ++k) out.eigenvalues(k) = ev(order[static_cast<std::size_t>(k)]);

    // u_k = lambda_k N^{-1/2} v_k for the candidate pairs only.
    const std::size_t n_cand = std::min<std::size_t>(tr.max_candidates, static_cast<std::size_t>(n) - 1);
    MatrixXd U(n, static_cast<Index>(n_cand));
    for (std::size_t c = 0; c < n_cand; ++c) {
        const Index k = static_cast<Index>(c + 1);
        VectorXd v = es.eigenvectors().col(order[static_cast<std::size_t>(k)]);
        fix_sign(v);
        U.col(static_cast<Index>(c)) = out.eigenvalues(k) * isq.cwiseProduct(v);
    }

    const double lambda2 = n_cand > 0 ? std::abs(out.eigenvalues(1)) : 0.0;
    std::vector<std::size_t> cand;
    for (std::size_t c = 0; c < n_cand; ++c) {
        CandidateReport rep;
        rep.index = c + 1;
        rep.eigenvalue = out.eigenvalues(static_cast<Index>(c + 1));
        const VectorXd u = U.col(static_cast<Index>(c));
        const double var = (u.array() - u.mean()).square().mean();
        if (std::abs(rep.eigenvalue) < tr.lambda_ratio * lambda2 || std::abs(rep.eigenvalue) < 1e-12) {
            rep.reason = "eigenvalue below truncation threshold";
        } else if (!(var > 1e-28)) {
            rep.reason = "zero variance";
        } else {
            cand.push_back(c);
        }
        out.candidates.push_back(rep);
    }

    std::vector<std::vector<std::size_t>> ambient(static_cast<std::size_t>(n));
    if (!cand.empty()) {
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
            ambient[i] = nearest(static_cast<std::size_t>(n), i, tr.neighbors,
                                 [&](std::size_t j) { return dist(static_cast<Index>(i), static_cast<Index>(j)); });
        });
    }
    const double floor = tr.resolution * out.epsilon;
    auto columns = [&](const std::vector<std::size_t> &cols) {
        MatrixXd P(n, static_cast<Index>(cols.size()));
        for (std::size_t a = 0; a < cols.size(); ++a) P.col(static_cast<Index>(a)) = U.col(static_cast<Index>(cols[a]));
        return P;
    };

    std::vector<std::size_t> kept;
    double F = 1.0;
    for (std::size_t c : cand) {
        CandidateReport &rep = out.candidates[c];
        const MatrixXd P = columns(kept);
        rep.regression_residual = regression_residual(P, U.col(static_cast<Index>(c)), tr.neighbors);
        if (tr.rule == PruningRule::local_regression) {
            rep.kept = kept.empty() || rep.regression_residual >= tr.dependency_residual;
            rep.reason = rep.kept ? "not explained by kept coordinates" : "locally a function of kept coordinates";
        } else if (kept.empty()) {
            rep.kept = true;
            rep.false_neighbors = false_neighbor_fraction(columns({c}), dist, ambient, floor);
            rep.reason = "leading nontrivial coordinate";
        } else if (F <= tr.injectivity_tolerance) {
            rep.reason = "kept coordinates already injective";
        } else {
            std::vector<std::size_t> trial = kept;
            trial.push_back(c);
            rep.false_neighbors = false_neighbor_fraction(columns(trial), dist, ambient, floor);
            rep.kept = rep.false_neighbors < (1.0 - tr.injectivity_gain) * F &&
                       F - rep.false_neighbors > tr.injectivity_tolerance;
            rep.reason = rep.kept ? "separates false neighbours" : "no gain in injectivity";
        }
        if (rep.kept) {
            kept.push_back(c);
            if (rep.false_neighbors >= 0.0) F = rep.false_neighbors;
        }
    }

    out.kept_indices.reserve(kept.size());
    for (std::size_t c : kept) out.kept_indices.push_back(c + 1);
    out.coordinates = columns(kept);
    out.degenerate = kept.empty();
    out.false_neighbors = kept.empty() ? 1.0
                          : tr.rule == PruningRule::neighbor_injectivity
                              ? F
                              : false_neighbor_fraction(out.coordinates, dist, ambient, floor);
    return out;
}

VectorXd nystrom_extend(const DiffusionCoordinates &coords, const VectorXd &query) {
    if (coords.nodes.rows() == 0)
        throw Error(ErrorCode::invalid_argument, "coordinates carry no node vectors for extension");
    if (query.size() != coords.nodes.cols())
        throw Error(ErrorCode::invalid_argument,
                    "query length " + std::to_string(query.size()) + " does not match delay vector length " +
                        std::to_string(coords.nodes.cols()));
    const double eps2 = coords.epsilon * coords.epsilon;
    const VectorXd d2 = (coords.nodes.rowwise() - query.transpose()).rowwise().squaredNorm();
    const VectorXd w = (-d2.array() / eps2).exp().matrix();
    const double total = w.sum();
    if (!(total > 1e-300))
        throw Error(ErrorCode::extrapolation, "query lies outside the sampled manifold (all kernel weights vanish)");
    VectorXd out(static_cast<Index>(coords.d()));
    for (std::size_t j = 0; j < coords.d(); ++j)
        out(static_cast<Index>(j)) =
            w.dot(coords.coordinates.col(static_cast<Index>(j))) / (coords.kept_eigenvalue(j) * total);
    return out;
}

DiffusionMap diffusion_map(const DelayVectorSet &set, const DmapsConfig &config) {
    if (set.size() == 0) throw Error(ErrorCode::invalid_argument, "empty delay vector set");
    if (config.landmark_stride < 1) throw Error(ErrorCode::invalid_argument, "landmark stride must be >= 1");

    DiffusionMap map;
    const Index n = static_cast<Index>(set.size());
    const Index w = set.values.cols();

    // Merge duplicates: sort rows lexicographically, then sweep neighbours.
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        for (Index c = 0; c < w; ++c)
            if (set.values(a, c) != set.values(b, c)) return set.values(a, c) < set.values(b, c);
        return false;
    });
    std::vector<Index> rep(static_cast<std::size_t>(n));
    for (std::size_t a = 0; a < order.size(); ++a) {
        rep[static_cast<std::size_t>(order[a])] = order[a];
        if (a > 0) {
            const Index prev = rep[static_cast<std::size_t>(order[a - 1])];
            const double diff = (set.values.row(order[a]) - set.values.row(prev)).cwiseAbs().maxCoeff();
            if (diff <= config.merge_tolerance) rep[static_cast<std::size_t>(order[a])] = prev;
        }
    }
    // Representative = earliest row of each group; distinct ids by first appearance.
    std::map<Index, Index> earliest;
    for (Index i = 0; i < n; ++i) {
        auto it = earliest.find(rep[static_cast<std::size_t>(i)]);
        if (it == earliest.end()) earliest.emplace(rep[static_cast<std::size_t>(i)], i);
    }
    std::map<Index, std::size_t> id_of;
    std::vector<Index> distinct_rows;
    map.distinct_of_row.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const Index first = earliest[rep[static_cast<std::size_t>(i)]];
        auto it = id_of.find(first);
        if (it == id_of.end()) {
            it = id_of.emplace(first, distinct_rows.size()).first;
            distinct_rows.push_back(first);
        }
        map.distinct_of_row[static_cast<std::size_t>(i)] = it->second;
    }
    const Index nd = static_cast<Index>(distinct_rows.size());
    map.distinct_points.resize(nd, w);
    for (Index i = 0; i < nd; ++i) map.distinct_points.row(i) = set.values.row(distinct_rows[static_cast<std::size_t>(i)]);

    std::vector<Index> landmarks;
    for (Index i = 0; i < nd; i += static_cast<Index>(config.landmark_stride)) landmarks.push_back(i);
    if (landmarks.size() < 3)
        throw Error(ErrorCode::degenerate_coordinates,
                    "fewer than 3 distinct delay vectors (" + std::to_string(landmarks.size()) +
                        ") enter the eigensolve");
    MatrixXd L(static_cast<Index>(landmarks.size()), w);
    for (std::size_t a = 0; a < landmarks.size(); ++a) L.row(static_cast<Index>(a)) = map.distinct_points.row(landmarks[a]);

    map.coords = build_coordinates(pairwise_distances(L), config.kernel, config.truncation);
    map.coords.nodes = std::move(L);

    const Index d = static_cast<Index>(map.coords.d());
    map.distinct_coordinates.resize(nd, d);
    if (config.landmark_stride == 1) {
        map.distinct_coordinates = map.coords.coordinates;
    } else {
        parallel_for(static_cast<std::size_t>(nd), [&](std::size_t i) {
            if (i % config.landmark_stride == 0)
                map.distinct_coordinates.row(static_cast<Index>(i)) =
                    map.coords.coordinates.row(static_cast<Index>(i / config.landmark_stride));
            else
                map.distinct_coordinates.row(static_cast<Index>(i)) =
                    nystrom_extend(map.coords, map.distinct_points.row(static_cast<Index>(i)).transpose()).transpose();
        });
    }
    return map;
}

EmbeddingScan embedding_scan(const TrajectoryBundle &bundle, const std::vector<std::size_t> &Ts,
                             const DmapsConfig &config) {
    if (Ts.empty()) throw Error(ErrorCode::invalid_argument, "no delay horizons to scan");
    EmbeddingScan scan;
    for (std::size_t T : Ts) {
        const DelayVectorSet set = delay_embed(bundle, T);
        EmbeddingScanEntry e;
        e.T = T;
        try {
            const DiffusionMap map = diffusion_map(set, config);
            const Index shown = std::min<Index>(map.coords.eigenvalues.size() - 1, 8);
            for (Index k = 1; k <= shown; ++k) e.eigenvalues.push_back(map.coords.eigenvalues(k));
            e.d = map.d();
        } catch (const Error &err) {
            if (err.code() != ErrorCode::degenerate_coordinates) throw;
            e.d = 0; // too few distinct vectors: nothing nontrivial to keep
        }
        scan.entries.push_back(std::move(e));
    }
    std::vector<std::size_t> idx(scan.entries.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scan.entries[a].T < scan.entries[b].T; });
    std::size_t stable = idx.back();
    for (std::size_t a = idx.size() - 1; a-- > 0;) {
        if (scan.entries[idx[a]].d != scan.entries[idx.back()].d) break;
        stable = idx[a];
    }
    scan.stable_T = scan.entries[stable].T;
    return scan;
}

} // namespace closedobs

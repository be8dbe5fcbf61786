#include "closedobs/dmaps.hpp"
#include "closedobs/error.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace closedobs;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Cyclic Jacobi rotations; independent of the library's eigensolver.
VectorXd jacobi_eigenvalues(MatrixXd A) {
    const int n = static_cast<int>(A.rows());
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(A(p, q)) < 1e-300) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = A(i, i);
    std::sort(ev.begin(), ev.end(), [](double a, double b) {
        return std::abs(a) != std::abs(b) ? std::abs(a) > std::abs(b) : a > b;
    });
    return Eigen::Map<VectorXd>(ev.data(), n);
}

MatrixXd brute_distances(const MatrixXd &X) {
    MatrixXd D(X.rows(), X.rows());
    for (int i = 0; i < X.rows(); ++i)
        for (int j = 0; j < X.rows(); ++j) {
            double s = 0.0;
            for (int c = 0; c < X.cols(); ++c) s += (X(i, c) - X(j, c)) * (X(i, c) - X(j, c));
            D(i, j) = std::sqrt(s);
        }
    return D;
}

MatrixXd random_points(int n, int dim, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MatrixXd X(n, dim);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < dim; ++c) X(i, c) = u(rng);
    return X;
}

MatrixXd curve(int n, bool closed) {
    MatrixXd X(n, 2);
    for (int i = 0; i < n; ++i) {
        const double s = static_cast<double>(i) / n;
        if (closed) X.row(i) << std::cos(2 * std::numbers::pi * s), std::sin(2 * std::numbers::pi * s);
        else X.row(i) << 3.0 * s, 0.2 * s * s;
    }
    return X;
}

} // namespace

TEST(Dmaps, DistancesMatchBruteForce) {
    const MatrixXd X = random_points(40, 5, 3);
    EXPECT_LE((pairwise_distances(X) - brute_distances(X)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Dmaps, EpsilonFromMedian) {
    MatrixXd D(3, 3);
    D << 0, 1, 4, 1, 0, 2, 4, 2, 0;
    EXPECT_DOUBLE_EQ(resolve_epsilon(D, {0.0, 1.0}), 2.0);
    EXPECT_DOUBLE_EQ(resolve_epsilon(D, {0.0, 1.5}), 3.0);
    EXPECT_DOUBLE_EQ(resolve_epsilon(D, {0.7, 9.0}), 0.7);
    MatrixXd E(4, 4);
    E << 0, 1, 2, 3, 1, 0, 5, 6, 2, 5, 0, 4, 3, 6, 4, 0;
    EXPECT_DOUBLE_EQ(resolve_epsilon(E, {0.0, 1.0}), 3.5); // even count: mean of the middle pair
    E(2, 3) = E(3, 2) = 0.0;                               // coincident points are skipped
    EXPECT_DOUBLE_EQ(resolve_epsilon(E, {0.0, 1.0}), 3.0);
    EXPECT_THROW(resolve_epsilon(D, {0.0, 0.0}), Error);
}

TEST(Dmaps, EquilateralTriangleSpectrum) {
    // Normalized kernel of three equidistant points is W / (1 + 2w):
    // eigenvalues 1 and (1 - w) / (1 + 2w) (double).
    const double r = 0.8, eps = 1.1, w = std::exp(-r * r / (eps * eps));
    MatrixXd D = MatrixXd::Constant(3, 3, r);
    D.diagonal().setZero();
    const auto c = build_coordinates(D, {eps, 1.0}, {});
    EXPECT_NEAR(c.eigenvalues(0), 1.0, 1e-14);
    EXPECT_NEAR(c.eigenvalues(1), (1 - w) / (1 + 2 * w), 1e-14);
    EXPECT_NEAR(c.eigenvalues(2), (1 - w) / (1 + 2 * w), 1e-14);
}

TEST(Dmaps, SpectrumMatchesJacobiOracle) {
    for (int n : {3, 5, 8, 12}) {
        const MatrixXd X = random_points(n, 3, static_cast<unsigned>(n));
        const MatrixXd D = brute_distances(X);
        const double eps = 0.9;
        MatrixXd W = (-(D.array().square()) / (eps * eps)).exp().matrix();
        const VectorXd isq = W.rowwise().sum().array().rsqrt().matrix();
        const VectorXd oracle = jacobi_eigenvalues(isq.asDiagonal() * W * isq.asDiagonal());
        const auto c = build_coordinates(D, {eps, 1.0}, {});
        ASSERT_EQ(c.eigenvalues.size(), n);
        for (int k = 0; k < n; ++k) EXPECT_NEAR(c.eigenvalues(k), oracle(k), 1e-9) << "n=" << n << " k=" << k;
    }
}

TEST(Dmaps, CoordinatesAreScaledMarkovEigenvectorsWithSignConvention) {
    const MatrixXd X = random_points(12, 2, 11);
    const MatrixXd D = brute_distances(X);
    const double eps = 1.0;
    const MatrixXd W = (-(D.array().square()) / (eps * eps)).exp().matrix();
    const VectorXd N = W.rowwise().sum();
    const MatrixXd P = N.cwiseInverse().asDiagonal() * W;
    const auto c = build_coordinates(D, {eps, 1.0}, {});
    ASSERT_GE(c.d(), 1u);
    for (std::size_t j = 0; j < c.d(); ++j) {
        const VectorXd u = c.coordinates.col(static_cast<Eigen::Index>(j));
        const double lambda = c.kept_eigenvalue(j);
        EXPECT_LE((P * u - lambda * u).cwiseAbs().maxCoeff(), 1e-10);
        // u = lambda N^{-1/2} v with v a unit vector.
        const VectorXd v = N.cwiseSqrt().cwiseProduct(u) / lambda;
        EXPECT_NEAR(v.norm(), 1.0, 1e-10);
        Eigen::Index arg;
        v.cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(v(arg), 0.0);
    }
}

TEST(Dmaps, ArcNeedsOneCoordinateCircleNeedsTwo) {
    const MatrixXd arc = curve(200, false), circle = curve(200, true);
    const auto a = build_coordinates(brute_distances(arc), {0.0, 1.0}, {});
    EXPECT_EQ(a.d(), 1u);
    EXPECT_EQ(a.kept_indices, std::vector<std::size_t>{1});
    const auto c = build_coordinates(brute_distances(circle), {0.0, 1.0}, {});
    EXPECT_EQ(c.d(), 2u);
    EXPECT_EQ(c.kept_indices, (std::vector<std::size_t>{1, 2}));
}

TEST(Dmaps, InvalidConfigurations) {
    const MatrixXd D = brute_distances(random_points(5, 2, 1));
    EXPECT_THROW(build_coordinates(D.topLeftCorner(2, 2), {}, {}), Error);
    TruncationConfig t;
    t.lambda_ratio = 0.0;
    EXPECT_THROW(build_coordinates(D, {}, t), Error);
}

namespace {
DelayVectorSet set_from(const MatrixXd &X) {
    DelayVectorSet s;
    s.T = 1;
    s.m = static_cast<std::size_t>(X.cols());
    s.dt = 1.0;
    s.values = X;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        s.source.push_back({0, static_cast<std::size_t>(i)});
        s.successor.push_back(i + 1 < X.rows() ? i + 1 : -1);
    }
    s.first_row = {0};
    return s;
}
} // namespace

TEST(Dmaps, DuplicatesMergeBeforeEigensolve) {
    MatrixXd X = curve(60, false);
    MatrixXd Y(120, 2);
    Y << X, X;
    const auto with_dups = diffusion_map(set_from(Y), {});
    const auto plain = diffusion_map(set_from(X), {});
    EXPECT_EQ(with_dups.distinct_points.rows(), 60);
    for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(with_dups.distinct_of_row[i], with_dups.distinct_of_row[i + 60]);
    EXPECT_LE((with_dups.distinct_coordinates - plain.distinct_coordinates).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dmaps, NystromReproducesLandmarks) {
    DmapsConfig cfg;
    cfg.landmark_stride = 3;
    const auto map = diffusion_map(set_from(curve(90, false)), cfg);
    ASSERT_EQ(map.coords.nodes.rows(), 30);
    for (Eigen::Index i = 0; i < 30; ++i) {
        const VectorXd ext = nystrom_extend(map.coords, map.coords.nodes.row(i).transpose());
        EXPECT_LE((ext - map.coords.coordinates.row(i).transpose()).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LE((ext - map.distinct_coordinates.row(3 * i).transpose()).cwiseAbs().maxCoeff(), 1e-10);
    }
    try {
        nystrom_extend(map.coords, VectorXd::Constant(2, 1e6));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::extrapolation);
    }
}

TEST(Dmaps, TooFewDistinctVectors) {
    MatrixXd X(4, 1);
    X << 1, 1, 2, 2;
    try {
        diffusion_map(set_from(X), {});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::degenerate_coordinates);
    }
}

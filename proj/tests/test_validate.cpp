#include "closedobs/error.hpp"
#include "closedobs/validate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

using namespace closedobs;

TEST(Validate, StorageMatchesEnumeration) {
    for (std::uint64_t d = 1; d <= 3; ++d)
        for (std::uint64_t n0 = 1; n0 <= 3; ++n0)
            for (std::uint64_t m : {1u, 2u})
                for (std::uint64_t N : {1u, 2u, 5u, 9u}) {
                    const auto s = storage_account(d, m, n0, N);
                    const std::uint64_t new_nodes =
                        (d + m) * full_grid(d, N).size() + d * full_grid(n0, N).size();
                    EXPECT_EQ(s.new_model_nodes, new_nodes);
                    EXPECT_EQ(s.naive_nodes, m * full_grid(n0 + 1, N).size());
                    EXPECT_EQ(s.reduction_holds, d < n0 + 1);
                }
}

TEST(Validate, StorageRatioGrowsLinearly) {
    const auto s = storage_account(1, 1, 2, 1000);
    EXPECT_EQ(s.naive_nodes, 1000000000u);
    EXPECT_EQ(s.new_model_nodes, 2000u + 1000000u);
    EXPECT_NEAR(s.ratio, 1e9 / 1002000.0, 1e-9);
    EXPECT_TRUE(s.reduction_holds);
    EXPECT_FALSE(storage_account(3, 1, 2, 10).reduction_holds);
}

TEST(Validate, StorageOverflowAndZeros) {
    EXPECT_THROW(storage_account(1, 1, 30, 1000000), Error);
    EXPECT_THROW(storage_account(0, 1, 2, 10), Error);
}

TEST(Validate, FullGridNodesAreDistinctLatticePoints) {
    const auto g = full_grid(3, 4);
    ASSERT_EQ(g.size(), 64u);
    std::set<std::vector<double>> seen(g.begin(), g.end());
    EXPECT_EQ(seen.size(), 64u);
    for (const auto &p : g)
        for (double v : p) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
            EXPECT_NEAR(v * 3.0, std::round(v * 3.0), 1e-12);
        }
}

TEST(Validate, BoundAuditZeroErrorIsExact) {
    BoundAuditConfig c;
    c.trials = 50;
    const auto a = bound_audit(c);
    for (double v : a.observed) EXPECT_LE(v, 1e-12);
    EXPECT_TRUE(a.satisfied);
}

TEST(Validate, BoundAuditConstantsAreMinimal) {
    BoundAuditConfig c;
    c.M = 0.5;
    c.e_G = 1e-3;
    c.e_phi = 2e-3;
    c.e_y = 5e-4;
    c.trials = 200;
    const auto a = bound_audit(c);
    EXPECT_TRUE(a.satisfied);
    EXPECT_GE(a.C1, 1.0);
    // Trial 0 with constant errors realizes the geometric sum exactly, so C1 = 1.
    EXPECT_NEAR(a.C1, 1.0, 1e-12);
    EXPECT_NEAR(a.C2, 1.0, 1e-12);
    EXPECT_NEAR(a.C3, 1.0, 1e-12);
    for (std::size_t n = 0; n < a.observed.size(); ++n) EXPECT_LE(a.observed[n], a.bound[n] * (1 + 1e-12));
    c.M = 1.0;
    EXPECT_THROW(bound_audit(c), Error);
}

TEST(Validate, LoglogSlopeOfPowerLaw) {
    const std::vector<double> x{0.1, 0.05, 0.02, 0.01};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * v * v);
    EXPECT_NEAR(loglog_slope(x, y), 2.0, 1e-12);
    EXPECT_THROW(loglog_slope({1.0, 2.0}, {1.0, 2.0}), Error);
    EXPECT_THROW(loglog_slope({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}), Error);
}

TEST(Validate, RelativeErrorDefinition) {
    Eigen::VectorXd o(3), p(3);
    o << 1.0, -4.0, 2.0;
    p << 1.5, -4.0, 2.0;
    EXPECT_DOUBLE_EQ(relative_error(o, p), 0.125);
    EXPECT_EQ(relative_error(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)), 0.0);
    EXPECT_TRUE(std::isinf(relative_error(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2))));
    EXPECT_THROW(relative_error(o, Eigen::VectorXd::Zero(2)), Error);
}

TEST(Validate, ExitChanceClampsAndUsesRunningMinimum) {
    const std::vector<double> nt{40, 30, 35, 10, -2, 0};
    EXPECT_DOUBLE_EQ(exit_chance(nt, 40, 0), 0.0);
    EXPECT_DOUBLE_EQ(exit_chance(nt, 40, 2), 0.25);
    EXPECT_DOUBLE_EQ(exit_chance(nt, 40, 3), 0.75);
    EXPECT_DOUBLE_EQ(exit_chance(nt, 40, 4), 1.0);
    EXPECT_DOUBLE_EQ(exit_chance(nt, 40, 100), 1.0);
    EXPECT_THROW(exit_chance(nt, 0, 1), Error);
}

TEST(Validate, MonotonicityViolation) {
    EgressAnalysis a;
    a.horizons = {25};
    a.points = {{10, 0, {0.9}}, {10, 50, {0.8}}, {10, 100, {0.85}}, {20, 0, {0.5}}, {20, 50, {0.5}}};
    EXPECT_NEAR(a.monotonicity_violation(0), 0.05, 1e-15);
}

TEST(Validate, Linspace) {
    EXPECT_EQ(linspace(0, 1, 5), (std::vector<double>{0, 0.25, 0.5, 0.75, 1}));
    EXPECT_EQ(linspace(3, 7, 1), std::vector<double>{3});
}

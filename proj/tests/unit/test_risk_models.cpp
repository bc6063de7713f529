#include <gtest/gtest.h>

#include <cmath>

#include "deepalloc/errors.hpp"
#include "deepalloc/risk_models.hpp"
#include "fixtures.hpp"

namespace deepalloc {
namespace {

TEST(EstimateStats, IdenticalColumnsArePerfectlyCorrelated) {
  Panel r(6, 2);
  r << 0.01, 0.01, -0.02, -0.02, 0.03, 0.03, 0.0, 0.0, 0.015, 0.015, -0.01, -0.01;
  const auto s = estimate_stats(r, 0, 5);
  EXPECT_NEAR(s.corr(0, 1), 1.0, 1e-12);
}

TEST(EstimateStats, AntiphaseColumnsAreAnticorrelated) {
  Panel r(8, 2);
  for (Eigen::Index t = 0; t < 8; ++t) {
    r(t, 0) = t % 2 == 0 ? 0.01 : -0.01;
    r(t, 1) = -r(t, 0);
  }
  EXPECT_NEAR(estimate_stats(r, 0, 7).corr(0, 1), -1.0, 1e-12);
}

TEST(EstimateStats, IndependentSamplesAreNearlyUncorrelated) {
  Rng rng(5);
  std::normal_distribution<double> n(0.0, 0.01);
  const Eigen::Index rows = 4000;
  Panel r(rows, 2);
  for (Eigen::Index t = 0; t < rows; ++t) r.row(t) << n(rng), n(rng);
  EXPECT_LT(std::abs(estimate_stats(r, 0, rows - 1).corr(0, 1)), 3.0 / std::sqrt(static_cast<double>(rows)));
}

TEST(EstimateStats, SampleMomentsByHand) {
  Panel r(3, 2);
  r << 0.01, 0.02, 0.03, 0.00, 0.02, 0.04;
  const auto s = estimate_stats(r, 0, 2);
  EXPECT_NEAR(s.mu(0), 0.02, 1e-15);
  EXPECT_NEAR(s.mu(1), 0.02, 1e-15);
  EXPECT_NEAR(s.sigma(0, 0), 1e-4, 1e-16);   // (1e-4 + 0 + 1e-4) / 2
  EXPECT_NEAR(s.sigma(1, 1), 4e-4, 1e-16);
  EXPECT_NEAR(s.sigma(0, 1), -1e-4, 1e-16);
  EXPECT_NEAR(s.vols(1), 0.02, 1e-15);
}

TEST(EstimateStats, TrailingWindowOnFrame) {
  ReturnFrame f;
  f.dates = business_days(Date(2020, 1, 1), 5);
  f.assets = {"a", "b"};
  f.returns.resize(5, 2);
  f.returns << 9, 9, 0.01, 0.02, 0.03, 0.0, 0.02, 0.04, 0.01, 0.01;
  const auto tail = estimate_stats(f, 3);
  const auto direct = estimate_stats(f.returns, 2, 4);
  EXPECT_EQ(tail.sigma, direct.sigma);
  EXPECT_EQ(tail.mu, direct.mu);
}

TEST(EstimateStats, Errors) {
  Panel r(3, 2);
  r << 0.01, 0.02, 0.01, 0.03, 0.01, 0.00;
  EXPECT_THROW(estimate_stats(r, 0, 2), DataError);  // first column constant
  Panel shortr(2, 2);
  shortr << 0.01, 0.02, 0.03, 0.00;
  EXPECT_THROW(estimate_stats(shortr, 0, 1), DataError);  // needs l + 1 rows
}

TEST(EstimateStats, PermutationEquivariantAndPsd) {
  Rng rng(9);
  std::normal_distribution<double> n(0.0, 0.01);
  Panel r(30, 4);
  for (Eigen::Index t = 0; t < 30; ++t)
    for (Eigen::Index k = 0; k < 4; ++k) r(t, k) = n(rng);
  const Eigen::Vector4i perm(2, 0, 3, 1);
  Panel p(30, 4);
  for (Eigen::Index k = 0; k < 4; ++k) p.col(k) = r.col(perm(k));
  const auto s = estimate_stats(r, 0, 29);
  const auto q = estimate_stats(p, 0, 29);
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_NEAR(q.mu(i), s.mu(perm(i)), 1e-15);
    for (Eigen::Index j = 0; j < 4; ++j) EXPECT_NEAR(q.sigma(i, j), s.sigma(perm(i), perm(j)), 1e-15);
  }
  const auto [lo, hi] = eigen_range(s.sigma);
  EXPECT_GE(lo, -1e-10 * hi);
}

TEST(Shrinkage, Examples) {
  Eigen::Matrix2d sigma;
  sigma << 0.04, 0.02, 0.02, 0.09;
  const auto s = stats_from_covariance(Eigen::Vector2d(0.1, 0.2), sigma);
  EXPECT_EQ(shrink_covariance(s, 0.0).sigma, s.sigma);
  const auto full = shrink_covariance(s, 1.0);
  EXPECT_EQ(full.sigma(0, 1), 0.0);
  EXPECT_EQ(full.sigma(1, 1), 0.09);
  EXPECT_NEAR(shrink_covariance(s, 0.5).sigma(0, 1), 0.01, 1e-15);
  EXPECT_NEAR(shrink_covariance(s, 0.5).corr(0, 1), 0.01 / 0.06, 1e-12);
  EXPECT_THROW(shrink_covariance(s, -0.1), DataError);
  EXPECT_THROW(shrink_covariance(s, 1.1), DataError);
}

TEST(StatsFromCovariance, ConsistentFields) {
  Rng rng(3);
  const auto s = testing::random_stats(rng, 4);
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_NEAR(s.vols(i) * s.vols(i) / s.sigma(i, i), 1.0, 1e-12);
    EXPECT_NEAR(s.corr(i, i), 1.0, 1e-15);
  }
}

}  // namespace
}  // namespace deepalloc

#pragma once

#include <Eigen/Dense>

#include <optional>

#include "deepalloc/market_data.hpp"

namespace deepalloc {

/// Moment inputs for the traditional allocators.
struct CovarianceStats {
  Eigen::VectorXd mu;     // mean return per asset
  Eigen::MatrixXd sigma;  // covariance
  Eigen::MatrixXd corr;   // correlation derived from sigma
  Eigen::VectorXd vols;   // sqrt(diag(sigma))

  Eigen::Index size() const { return mu.size(); }
};

/// Sample mean and sample covariance (n - 1 divisor) over the trailing
/// `window` rows, or the whole frame when no window is given.
CovarianceStats estimate_stats(const ReturnFrame& returns, std::optional<std::size_t> window = {});

/// Same, over rows [first, last] of a return panel.
CovarianceStats estimate_stats(const Panel& returns, Eigen::Index first, Eigen::Index last);

/// Builds consistent stats from a given mean vector and covariance matrix.
/// Zero-variance assets get a zero correlation row (diagonal 1).
CovarianceStats stats_from_covariance(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma);

/// (1 - lambda) * Sigma + lambda * diag(Sigma). Correlation and vols recomputed.
CovarianceStats shrink_covariance(const CovarianceStats& stats, double lambda);

/// Smallest / largest eigenvalue of the covariance.
std::pair<double, double> eigen_range(const Eigen::MatrixXd& sigma);

}  // namespace deepalloc

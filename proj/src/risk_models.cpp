#include "deepalloc/risk_models.hpp"

#include <fmt/format.h>

#include <cmath>

#include "deepalloc/errors.hpp"

namespace deepalloc {

namespace {

Eigen::MatrixXd correlation_of(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& vols) {
  const auto l = sigma.rows();
  Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(l, l);
  for (Eigen::Index i = 0; i < l; ++i) {
    for (Eigen::Index j = 0; j < l; ++j) {
      if (i == j) {
        corr(i, j) = 1.0;
      } else if (vols(i) > 0.0 && vols(j) > 0.0) {
        corr(i, j) = std::clamp(sigma(i, j) / (vols(i) * vols(j)), -1.0, 1.0);
      }
    }
  }
  return corr;
}

}  // namespace

CovarianceStats stats_from_covariance(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() != mu.size()) {
    throw UsageError("covariance must be square and match the mean vector");
  }
  CovarianceStats s;
  s.mu = mu;
  s.sigma = 0.5 * (sigma + sigma.transpose());
  s.vols = s.sigma.diagonal().cwiseMax(0.0).cwiseSqrt();
  s.corr = correlation_of(s.sigma, s.vols);
  return s;
}

CovarianceStats estimate_stats(const Panel& returns, Eigen::Index first, Eigen::Index last) {
  const auto l = returns.cols();
  if (first < 0 || last >= returns.rows() || last < first) {
    throw DataError(DataError::Kind::kInvalidArgument,
                    fmt::format("invalid estimation rows [{}, {}]", first, last));
  }
  const auto n = last - first + 1;
  if (n < l + 1) {
    throw DataError(DataError::Kind::kInsufficientHistory,
                    fmt::format("insufficient rows for covariance: have {}, need {}", n, l + 1));
  }
  const Eigen::MatrixXd block = returns.middleRows(first, n);
  Eigen::VectorXd mu = block.colwise().mean().transpose();
  const Eigen::MatrixXd centered = block.rowwise() - mu.transpose();
  Eigen::MatrixXd sigma = (centered.transpose() * centered) / static_cast<double>(n - 1);
  for (Eigen::Index i = 0; i < l; ++i) {
    if (!(sigma(i, i) > 0.0)) {
      throw DataError(DataError::Kind::kDegenerateAsset,
                      fmt::format("degenerate asset {}: zero variance in estimation window", i));
    }
  }
  return stats_from_covariance(mu, sigma);
}

CovarianceStats estimate_stats(const ReturnFrame& returns, std::optional<std::size_t> window) {
  const auto rows = static_cast<Eigen::Index>(returns.rows());
  if (rows == 0) {
    throw DataError(DataError::Kind::kInsufficientHistory, "insufficient rows: empty return frame");
  }
  Eigen::Index first = 0;
  if (window) {
    if (*window > returns.rows()) {
      throw DataError(DataError::Kind::kInsufficientHistory,
                      fmt::format("insufficient rows: window {} exceeds {} rows", *window, rows));
    }
    first = rows - static_cast<Eigen::Index>(*window);
  }
  try {
    return estimate_stats(returns.returns, first, rows - 1);
  } catch (const DataError& e) {
    if (e.kind() != DataError::Kind::kDegenerateAsset) throw;
    // Re-raise with the asset name.
    for (Eigen::Index i = 0; i < returns.returns.cols(); ++i) {
      const auto col = returns.returns.col(i).segment(first, rows - first);
      if ((col.array() == col(0)).all()) {
        throw DataError(DataError::Kind::kDegenerateAsset,
                        fmt::format("degenerate asset '{}': zero variance",
                                    returns.assets[static_cast<std::size_t>(i)]));
      }
    }
    throw;
  }
}

CovarianceStats shrink_covariance(const CovarianceStats& stats, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw DataError(DataError::Kind::kInvalidArgument,
                    fmt::format("shrinkage {} outside [0, 1]", lambda));
  }
  Eigen::MatrixXd target = stats.sigma.diagonal().asDiagonal();
  return stats_from_covariance(stats.mu, (1.0 - lambda) * stats.sigma + lambda * target);
}

std::pair<double, double> eigen_range(const Eigen::MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
  return {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
}

}  // namespace deepalloc

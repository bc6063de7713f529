#pragma once

#include <Eigen/Dense>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "deepalloc/backtest.hpp"
#include "deepalloc/random.hpp"
#include "deepalloc/risk_models.hpp"

namespace deepalloc::testing {

/// Moderately conditioned random instance: vols in [0.1, 0.3], means in [0.02, 0.15].
CovarianceStats random_stats(Rng& rng, Eigen::Index l);

/// Random correlation matrix with entries bounded away from +-1.
Eigen::MatrixXd random_correlation(Rng& rng, Eigen::Index l);

/// Diagonal covariance diag(vols^2) with the given means (zeros by default).
CovarianceStats diagonal_stats(const Eigen::VectorXd& vols, Eigen::VectorXd mu = {});

/// Prices starting at 100 that realize exactly `returns` (row t = return on price row t + 1).
PriceFrame prices_from_returns(const Panel& returns, Date start = Date(2000, 1, 3));

Dataset dataset_from_returns(const Panel& returns, int vol_window, const LagSet& lags, const LagSet& context_lags);

/// Fresh empty directory under the system temp dir.
std::filesystem::path fresh_dir(const std::string& name);

std::string slurp(const std::filesystem::path& path);

/// Runs the CLI binary with a shell command line; returns its exit code.
int run_cli_at(const std::string& binary, const std::string& args, const std::filesystem::path& log = {});

#ifdef DEEPALLOC_CLI_PATH
inline int run_cli(const std::string& args, const std::filesystem::path& log = {}) {
  return run_cli_at(DEEPALLOC_CLI_PATH, args, log);
}
#endif

}  // namespace deepalloc::testing

#include "fixtures.hpp"

#include <sys/wait.h>

#include <fstream>
#include <sstream>

namespace deepalloc::testing {

Eigen::MatrixXd random_correlation(Rng& rng, Eigen::Index l) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd a(l, l);
  for (Eigen::Index i = 0; i < l; ++i)
    for (Eigen::Index j = 0; j < l; ++j) a(i, j) = z(rng);
  Eigen::MatrixXd s = a * a.transpose() + static_cast<double>(l) * Eigen::MatrixXd::Identity(l, l);
  const Eigen::VectorXd d = s.diagonal().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * s * d.asDiagonal();
}

CovarianceStats random_stats(Rng& rng, Eigen::Index l) {
  std::uniform_real_distribution<double> vol(0.1, 0.3);
  std::uniform_real_distribution<double> mean(0.02, 0.15);
  Eigen::VectorXd v(l);
  Eigen::VectorXd mu(l);
  for (Eigen::Index i = 0; i < l; ++i) {
    v(i) = vol(rng);
    mu(i) = mean(rng);
  }
  const Eigen::MatrixXd c = random_correlation(rng, l);
  return stats_from_covariance(mu, v.asDiagonal() * c * v.asDiagonal());
}

CovarianceStats diagonal_stats(const Eigen::VectorXd& vols, Eigen::VectorXd mu) {
  if (mu.size() == 0) mu = Eigen::VectorXd::Zero(vols.size());
  return stats_from_covariance(mu, vols.cwiseAbs2().asDiagonal().toDenseMatrix());
}

PriceFrame prices_from_returns(const Panel& returns, Date start) {
  PriceFrame f;
  const auto t = returns.rows();
  f.dates = business_days(start, static_cast<std::size_t>(t + 1));
  for (Eigen::Index k = 0; k < returns.cols(); ++k) f.assets.push_back("a" + std::to_string(k + 1));
  f.prices.resize(t + 1, returns.cols());
  f.prices.row(0).setConstant(100.0);
  for (Eigen::Index i = 0; i < t; ++i) {
    f.prices.row(i + 1) = f.prices.row(i).array() * (1.0 + returns.row(i).array());
  }
  return f;
}

Dataset dataset_from_returns(const Panel& returns, int vol_window, const LagSet& lags, const LagSet& context_lags) {
  return make_dataset(prices_from_returns(returns), vol_window, lags, context_lags);
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("deepalloc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli_at(const std::string& binary, const std::string& args, const std::filesystem::path& log) {
  const std::string sink = log.empty() ? "/dev/null" : log.string();
  const std::string cmd = "\"" + binary + "\" " + args + " > \"" + sink + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace deepalloc::testing

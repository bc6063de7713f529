#include "metric_oracle.hpp"

#include <algorithm>
#include <cmath>

namespace deepalloc::testing {

namespace {

std::vector<long double> returns_of(const std::vector<double>& v) {
  std::vector<long double> r;
  for (std::size_t i = 1; i < v.size(); ++i) r.push_back(static_cast<long double>(v[i]) / v[i - 1] - 1.0L);
  return r;
}

}  // namespace

double oracle_annualized_return(const std::vector<double>& values) {
  long double log_growth = 0.0L;
  for (long double x : returns_of(values)) log_growth += std::log1p(x);
  const long double years = static_cast<long double>(values.size() - 1) / 252.0L;
  return static_cast<double>(std::expm1(log_growth / years));
}

std::optional<double> oracle_sharpe(const std::vector<double>& values) {
  const auto r = returns_of(values);
  long double mean = 0.0L;
  for (auto x : r) mean += x;
  mean /= static_cast<long double>(r.size());
  long double var = 0.0L;
  for (auto x : r) var += (x - mean) * (x - mean);
  var /= static_cast<long double>(r.size());
  if (var == 0.0L) return std::nullopt;
  return static_cast<double>(oracle_annualized_return(values) / (std::sqrt(252.0L * var)));
}

std::optional<double> oracle_sortino(const std::vector<double>& values) {
  const auto r = returns_of(values);
  long double down = 0.0L;
  std::size_t count = 0;
  for (auto x : r) {
    if (x < 0.0L) {
      down += x * x;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  const long double dd = std::sqrt(down / static_cast<long double>(r.size()));
  return static_cast<double>(oracle_annualized_return(values) / (std::sqrt(252.0L) * dd));
}

double oracle_max_drawdown(const std::vector<double>& values) {
  double worst = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    for (std::size_t i = 0; i <= j; ++i) worst = std::max(worst, (values[i] - values[j]) / values[i]);
  }
  return worst;
}

}  // namespace deepalloc::testing

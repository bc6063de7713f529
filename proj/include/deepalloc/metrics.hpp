#pragma once

#include <span>
#include <string>

namespace deepalloc {

inline constexpr double kTradingDays = 252.0;

/// A performance figure that may be undefined (zero variance, no down days).
struct Metric {
  double value = 0.0;
  bool defined = false;

  static Metric of(double v) { return {v, true}; }
  static Metric undefined() { return {}; }
};

/// Text for reports: the number, or "undefined". Never prints NaN.
std::string format_metric(const Metric& m, int precision = 6);

// All functions take equity values P_0..P_T (T >= 1 steps). A curve that hits
// zero is treated as ending there.

/// (P_T / P_0)^(252 / T) - 1.
Metric annualized_return(std::span<const double> values);
/// Annualized return over sqrt(252) * population std of step returns.
Metric sharpe(std::span<const double> values);
/// Annualized return over sqrt(252) * sqrt(mean(min(r, 0)^2)).
Metric sortino(std::span<const double> values);
/// max_t (RM_t - P_t) / RM_t with RM_t the running maximum.
Metric max_drawdown(std::span<const double> values);

}  // namespace deepalloc

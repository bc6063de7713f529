#include "deepalloc/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "deepalloc/errors.hpp"

namespace deepalloc {

namespace {

std::span<const double> live_part(std::span<const double> values) {
  if (values.size() < 2) throw UsageError("metrics need at least two curve values");
  if (!(values[0] > 0.0)) throw UsageError("curve must start positive");
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i] > 0.0)) return values.first(i + 1);
  }
  return values;
}

std::vector<double> step_returns(std::span<const double> v) {
  std::vector<double> r(v.size() - 1);
  for (std::size_t i = 1; i < v.size(); ++i) r[i - 1] = v[i] / v[i - 1] - 1.0;
  return r;
}

// Ratios whose denominator is this small relative to the returns are reported undefined.
bool negligible(double denom, const std::vector<double>& r) {
  double scale = 0.0;
  for (double x : r) scale = std::max(scale, std::abs(x));
  return denom <= 1e-12 * std::max(scale, 1e-300);
}

}  // namespace

std::string format_metric(const Metric& m, int precision) {
  if (!m.defined || !std::isfinite(m.value)) return "undefined";
  return fmt::format("{:.{}f}", m.value, precision);
}

Metric annualized_return(std::span<const double> values) {
  const auto v = live_part(values);
  const double total = v.back() / v.front();
  if (total <= 0.0) return Metric::of(-1.0);
  const double steps = static_cast<double>(values.size() - 1);
  return Metric::of(std::pow(total, kTradingDays / steps) - 1.0);
}

Metric sharpe(std::span<const double> values) {
  const auto ann = annualized_return(values);
  const auto r = step_returns(live_part(values));
  const double n = static_cast<double>(r.size());
  double mean = 0.0;
  for (double x : r) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : r) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  if (negligible(sd, r)) return Metric::undefined();
  return Metric::of(ann.value / (std::sqrt(kTradingDays) * sd));
}

Metric sortino(std::span<const double> values) {
  const auto ann = annualized_return(values);
  const auto r = step_returns(live_part(values));
  double ss = 0.0;
  bool any_down = false;
  for (double x : r) {
    if (x < 0.0) {
      ss += x * x;
      any_down = true;
    }
  }
  if (!any_down) return Metric::undefined();
  const double dd = std::sqrt(ss / static_cast<double>(r.size()));
  return Metric::of(ann.value / (std::sqrt(kTradingDays) * dd));
}

Metric max_drawdown(std::span<const double> values) {
  if (values.empty()) throw UsageError("metrics need at least one curve value");
  double running_max = values[0];
  double mdd = 0.0;
  for (double p : values) {
    running_max = std::max(running_max, p);
    if (running_max > 0.0) mdd = std::max(mdd, (running_max - p) / running_max);
  }
  return Metric::of(mdd);
}

}  // namespace deepalloc

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "deepalloc/date.hpp"

namespace deepalloc {

/// Date-major panel: one row per date, one column per asset or series.
using Panel = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Strictly positive prices, one row per date.
struct PriceFrame {
  std::vector<Date> dates;
  std::vector<std::string> assets;
  Panel prices;

  std::size_t rows() const { return dates.size(); }
  std::size_t num_assets() const { return assets.size(); }
};

/// Arithmetic returns. Row t is the return realized on dates[t], i.e. p_{t+1}/p_t - 1
/// in price-row terms.
struct ReturnFrame {
  std::vector<Date> dates;
  std::vector<std::string> assets;
  Panel returns;

  std::size_t rows() const { return dates.size(); }
  std::size_t num_assets() const { return assets.size(); }
};

/// Trailing population volatility over `window` returns. Row-aligned with the
/// ReturnFrame it came from; rows before `window - 1` are NaN.
struct VolFrame {
  std::vector<Date> dates;
  std::vector<std::string> assets;
  Panel vols;
  int window = 0;

  std::size_t rows() const { return dates.size(); }
  bool defined(std::size_t t) const { return t + 1 >= static_cast<std::size_t>(window); }
};

/// Arbitrary named numeric series (context inputs). No sign restriction.
struct SeriesFrame {
  std::vector<Date> dates;
  std::vector<std::string> names;
  Panel values;

  std::size_t rows() const { return dates.size(); }
};

struct Regime {
  Eigen::VectorXd mean;  // per-step return mean, one entry per asset
  Eigen::VectorXd vol;   // per-step return std, >= 0
  double correlation = 0.0;  // pairwise, equicorrelated
  double expected_duration = 1.0;  // geometric mean duration in steps
};

struct SyntheticSpec {
  std::size_t num_assets = 0;
  std::size_t num_steps = 0;  // number of returns; the frame has num_steps + 1 rows
  std::vector<Regime> regimes;
  std::uint64_t seed = 0;
  Date start{2000, 1, 3};
};

/// Generated prices together with the regime that produced each return row.
struct SyntheticPath {
  PriceFrame prices;
  std::vector<int> regime;  // regime[t] drives return row t (price row t + 1)
};

// Ingestion / serialization.
PriceFrame load_price_csv(const std::filesystem::path& path);
SeriesFrame load_series_csv(const std::filesystem::path& path);
std::string format_price_csv(const PriceFrame& frame);
void write_price_csv(const PriceFrame& frame, const std::filesystem::path& path);
std::string format_series_csv(const std::vector<Date>& dates, const std::vector<std::string>& names,
                              const Panel& values);

/// Throws DataError if the frame breaks any PriceFrame invariant.
void validate(const PriceFrame& frame);

ReturnFrame compute_returns(const PriceFrame& frame);
VolFrame rolling_volatility(const ReturnFrame& returns, int window);

PriceFrame generate_synthetic(const SyntheticSpec& spec);

/// Named presets: "calm" (one regime), "two-regime" (assets 1 and 2 take turns
/// dominating), "crash" (calm spells broken by short high-volatility sell-offs).
SyntheticSpec synthetic_scenario(std::string_view name, std::size_t assets, std::size_t steps,
                                 std::uint64_t seed);
std::vector<std::string> scenario_names();
SyntheticPath generate_synthetic_path(const SyntheticSpec& spec);

/// `count` consecutive weekdays starting at `start` (or the next weekday).
std::vector<Date> business_days(Date start, std::size_t count);

}  // namespace deepalloc

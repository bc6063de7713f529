#pragma once

#include <string_view>
#include <vector>

#include "deepalloc/market_data.hpp"
#include "deepalloc/tensor.hpp"

namespace deepalloc {

/// Observation lags (0, i_1, ..., i_j): strictly increasing, starting at 0.
class LagSet {
 public:
  LagSet() : lags_{0} {}
  explicit LagSet(std::vector<int> lags);

  /// Parses "0,1,2,3,4,20,60".
  static LagSet parse(std::string_view text);
  static LagSet default_lags() { return LagSet({0, 1, 2, 3, 4, 20, 60}); }

  const std::vector<int>& values() const { return lags_; }
  std::size_t size() const { return lags_.size(); }
  int max() const { return lags_.back(); }
  std::string to_string() const;

  friend bool operator==(const LagSet&, const LagSet&) = default;

 private:
  std::vector<int> lags_;
};

/// Pseudo-state at one decision time. Lag axes run oldest to newest, so the
/// last column is always "as of t".
struct Observation {
  tensor::Tensor asset;    // (2, m, L): channel 0 returns, channel 1 volatilities
  tensor::Tensor context;  // (p, Lc)
  Date timestamp;
  std::size_t row = 0;     // return-frame row t
};

/// Observations for consecutive rows, stacked along a leading batch axis.
struct ObservationBatch {
  tensor::Tensor asset;    // (N, 2m, L)
  tensor::Tensor context;  // (N, p, Lc)
  std::vector<std::size_t> rows;

  std::size_t size() const { return rows.size(); }
};

/// Context series derived from the asset panel: max return, min return, max volatility.
SeriesFrame build_context_series(const ReturnFrame& returns, const VolFrame& vols);

/// Appends external series, matched by date. Every date of `derived` must be present.
SeriesFrame append_context(const SeriesFrame& derived, const SeriesFrame& external);

/// First return row at which every lag of every block is defined.
std::size_t first_observable_row(const VolFrame& vols, const SeriesFrame& context, const LagSet& lags,
                                 const LagSet& context_lags);

Observation build_observation(const ReturnFrame& returns, const VolFrame& vols,
                              const SeriesFrame& context, const LagSet& lags,
                              const LagSet& context_lags, std::size_t t);

/// Rows [first, last] inclusive, filled in parallel.
ObservationBatch build_observation_batch(const ReturnFrame& returns, const VolFrame& vols,
                                         const SeriesFrame& context, const LagSet& lags,
                                         const LagSet& context_lags, std::size_t first,
                                         std::size_t last);

}  // namespace deepalloc

#include "deepalloc/features.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <charconv>
#include <cmath>
#include <exception>
#include <map>

#include "deepalloc/errors.hpp"
#include "deepalloc/io.hpp"

namespace deepalloc {

LagSet::LagSet(std::vector<int> lags) : lags_(std::move(lags)) {
  if (lags_.empty() || lags_.front() != 0) {
    throw UsageError("lag set must start with 0");
  }
  for (std::size_t i = 1; i < lags_.size(); ++i) {
    if (lags_[i] <= lags_[i - 1]) {
      throw UsageError(fmt::format("lag set must be strictly increasing: {}", fmt::join(lags_, ",")));
    }
  }
}

LagSet LagSet::parse(std::string_view text) {
  std::vector<int> lags;
  for (const auto& part : io::split(text, ',')) {
    const auto cell = io::trim(part);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size() || v < 0) {
      throw UsageError(fmt::format("invalid lag '{}' in '{}'", cell, text));
    }
    lags.push_back(v);
  }
  return LagSet(std::move(lags));
}

std::string LagSet::to_string() const { return fmt::format("{}", fmt::join(lags_, ",")); }

SeriesFrame build_context_series(const ReturnFrame& returns, const VolFrame& vols) {
  if (returns.dates != vols.dates || returns.returns.cols() != vols.vols.cols()) {
    throw DataError(DataError::Kind::kMisaligned, "return and volatility frames are misaligned");
  }
  SeriesFrame ctx;
  ctx.dates = returns.dates;
  ctx.names = {"max_return", "min_return", "max_vol"};
  const auto rows = returns.returns.rows();
  ctx.values.resize(rows, 3);
  for (Eigen::Index t = 0; t < rows; ++t) {
    ctx.values(t, 0) = returns.returns.row(t).maxCoeff();
    ctx.values(t, 1) = returns.returns.row(t).minCoeff();
    ctx.values(t, 2) = vols.defined(static_cast<std::size_t>(t))
                           ? vols.vols.row(t).maxCoeff()
                           : std::numeric_limits<double>::quiet_NaN();
  }
  return ctx;
}

SeriesFrame append_context(const SeriesFrame& derived, const SeriesFrame& external) {
  std::map<Date, Eigen::Index> index;
  for (std::size_t i = 0; i < external.dates.size(); ++i) {
    index.emplace(external.dates[i], static_cast<Eigen::Index>(i));
  }
  SeriesFrame out;
  out.dates = derived.dates;
  out.names = derived.names;
  out.names.insert(out.names.end(), external.names.begin(), external.names.end());
  const auto p0 = derived.values.cols();
  const auto p1 = external.values.cols();
  out.values.resize(static_cast<Eigen::Index>(derived.dates.size()), p0 + p1);
  for (std::size_t t = 0; t < derived.dates.size(); ++t) {
    const auto it = index.find(derived.dates[t]);
    if (it == index.end()) {
      throw DataError(DataError::Kind::kMisaligned,
                      fmt::format("context series missing date {}", derived.dates[t].iso()));
    }
    const auto row = static_cast<Eigen::Index>(t);
    out.values.row(row).head(p0) = derived.values.row(row);
    out.values.row(row).tail(p1) = external.values.row(it->second);
  }
  return out;
}

namespace {

void check_alignment(const ReturnFrame& returns, const VolFrame& vols, const SeriesFrame& context) {
  if (returns.dates != vols.dates || returns.returns.cols() != vols.vols.cols()) {
    throw DataError(DataError::Kind::kMisaligned, "return and volatility frames are misaligned");
  }
  if (context.dates != returns.dates) {
    throw DataError(DataError::Kind::kMisaligned,
                    "context series are missing or misaligned with the return frame");
  }
}

std::size_t first_defined_context_row(const SeriesFrame& context) {
  const auto rows = static_cast<std::size_t>(context.values.rows());
  for (std::size_t t = 0; t < rows; ++t) {
    if (context.values.row(static_cast<Eigen::Index>(t)).allFinite()) return t;
  }
  return rows;
}

// Writes the (2m x L) asset block and the (p x Lc) context block for row t.
void fill_observation(const ReturnFrame& returns, const VolFrame& vols, const SeriesFrame& context,
                      const LagSet& lags, const LagSet& context_lags, std::size_t t, double* asset,
                      double* ctx) {
  const auto m = static_cast<std::size_t>(returns.returns.cols());
  const std::size_t L = lags.size();
  const auto& lag = lags.values();
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t j = 0; j < L; ++j) {
      const auto u = static_cast<Eigen::Index>(t - static_cast<std::size_t>(lag[L - 1 - j]));
      asset[k * L + j] = returns.returns(u, static_cast<Eigen::Index>(k));
      asset[(m + k) * L + j] = vols.vols(u, static_cast<Eigen::Index>(k));
    }
  }
  const auto p = static_cast<std::size_t>(context.values.cols());
  const std::size_t Lc = context_lags.size();
  const auto& clag = context_lags.values();
  for (std::size_t q = 0; q < p; ++q) {
    for (std::size_t j = 0; j < Lc; ++j) {
      const auto u = static_cast<Eigen::Index>(t - static_cast<std::size_t>(clag[Lc - 1 - j]));
      ctx[q * Lc + j] = context.values(u, static_cast<Eigen::Index>(q));
    }
  }
}

void check_row(const ReturnFrame& returns, const VolFrame& vols, const SeriesFrame& context,
               const LagSet& lags, const LagSet& context_lags, std::size_t t) {
  const std::size_t first = first_observable_row(vols, context, lags, context_lags);
  if (t < first) {
    throw DataError(DataError::Kind::kInsufficientHistory,
                    fmt::format("insufficient history for lags at row {} (first observable row {})",
                                t, first));
  }
  if (t >= returns.rows()) {
    throw DataError(DataError::Kind::kInvalidArgument,
                    fmt::format("row {} beyond the return frame ({} rows)", t, returns.rows()));
  }
}

}  // namespace

std::size_t first_observable_row(const VolFrame& vols, const SeriesFrame& context, const LagSet& lags,
                                 const LagSet& context_lags) {
  const std::size_t asset_first = static_cast<std::size_t>(vols.window - 1) +
                                  static_cast<std::size_t>(lags.max());
  const std::size_t ctx_first =
      first_defined_context_row(context) + static_cast<std::size_t>(context_lags.max());
  return std::max(asset_first, context.values.cols() > 0 ? ctx_first : std::size_t{0});
}

Observation build_observation(const ReturnFrame& returns, const VolFrame& vols,
                              const SeriesFrame& context, const LagSet& lags,
                              const LagSet& context_lags, std::size_t t) {
  check_alignment(returns, vols, context);
  check_row(returns, vols, context, lags, context_lags, t);
  const auto m = static_cast<std::size_t>(returns.returns.cols());
  const auto p = static_cast<std::size_t>(context.values.cols());
  Observation obs;
  obs.asset = tensor::Tensor({2, m, lags.size()});
  obs.context = tensor::Tensor({p, context_lags.size()});
  obs.timestamp = returns.dates[t];
  obs.row = t;
  fill_observation(returns, vols, context, lags, context_lags, t, obs.asset.data(),
                   obs.context.data());
  return obs;
}

ObservationBatch build_observation_batch(const ReturnFrame& returns, const VolFrame& vols,
                                         const SeriesFrame& context, const LagSet& lags,
                                         const LagSet& context_lags, std::size_t first,
                                         std::size_t last) {
  check_alignment(returns, vols, context);
  if (last < first) throw UsageError("observation batch needs first <= last");
  check_row(returns, vols, context, lags, context_lags, first);
  check_row(returns, vols, context, lags, context_lags, last);
  const auto m = static_cast<std::size_t>(returns.returns.cols());
  const auto p = static_cast<std::size_t>(context.values.cols());
  const std::size_t n = last - first + 1;
  ObservationBatch batch;
  batch.asset = tensor::Tensor({n, 2 * m, lags.size()});
  batch.context = tensor::Tensor({n, p, context_lags.size()});
  batch.rows.resize(n);
  const std::size_t asset_stride = 2 * m * lags.size();
  const std::size_t ctx_stride = p * context_lags.size();
  const auto count = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (count > 256)
  for (long i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    batch.rows[idx] = first + idx;
    fill_observation(returns, vols, context, lags, context_lags, first + idx,
                     batch.asset.data() + idx * asset_stride, batch.context.data() + idx * ctx_stride);
  }
  return batch;
}

}  // namespace deepalloc

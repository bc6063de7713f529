#include "deepalloc/market_data.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "deepalloc/errors.hpp"
#include "deepalloc/io.hpp"

namespace deepalloc {

namespace {

struct RawCsv {
  std::vector<std::string> names;
  std::vector<Date> dates;
  Panel values;
};

// Reads `date,NAME1,...` panels. Enforces ordering and completeness but not sign.
RawCsv read_panel_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw DataError(DataError::Kind::kMissingFile, fmt::format("missing file '{}'", path.string()));
  }
  const std::string text = io::read_file(path);
  std::istringstream in(text);
  std::string line;

  RawCsv csv;
  if (!std::getline(in, line)) {
    throw DataError(DataError::Kind::kParse, fmt::format("'{}' is empty", path.string()));
  }
  const auto header = io::split(io::trim(line), ',');
  if (header.size() < 2 || io::trim(header[0]) != "date") {
    throw DataError(DataError::Kind::kParse,
                    fmt::format("'{}': header must be 'date,<name1>,...'", path.string()));
  }
  for (std::size_t i = 1; i < header.size(); ++i) {
    auto name = std::string(io::trim(header[i]));
    if (name.empty()) {
      throw DataError(DataError::Kind::kParse,
                      fmt::format("'{}': empty column name {}", path.string(), i));
    }
    csv.names.push_back(std::move(name));
  }

  std::vector<double> cells;
  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    const auto fields = io::split(io::trim(line), ',');
    if (fields.size() != header.size()) {
      throw DataError(DataError::Kind::kParse,
                      fmt::format("'{}' line {}: expected {} cells, found {}", path.string(),
                                  line_no, header.size(), fields.size()));
    }
    const Date date = Date::parse(io::trim(fields[0]));
    if (!csv.dates.empty()) {
      if (date == csv.dates.back()) {
        throw DataError(DataError::Kind::kDuplicateDate,
                        fmt::format("duplicate date {} at row {}", date.iso(), row));
      }
      if (date < csv.dates.back()) {
        throw DataError(DataError::Kind::kUnorderedDates,
                        fmt::format("unordered dates at row {}: {} after {}", row, date.iso(),
                                    csv.dates.back().iso()));
      }
    }
    csv.dates.push_back(date);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      try {
        cells.push_back(io::parse_double(fields[k]));
      } catch (const DataError&) {
        throw DataError(DataError::Kind::kParse,
                        fmt::format("non-numeric cell '{}' at (row {}, {})",
                                    io::trim(fields[k]), row, csv.names[k - 1]));
      }
    }
    ++row;
  }
  csv.values = Panel(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(csv.names.size()));
  for (std::size_t i = 0; i < cells.size(); ++i) csv.values.data()[i] = cells[i];
  return csv;
}

}  // namespace

void validate(const PriceFrame& frame) {
  if (frame.prices.rows() != static_cast<Eigen::Index>(frame.dates.size()) ||
      frame.prices.cols() != static_cast<Eigen::Index>(frame.assets.size())) {
    throw DataError(DataError::Kind::kInvalidArgument, "price panel shape does not match labels");
  }
  for (std::size_t t = 1; t < frame.dates.size(); ++t) {
    if (frame.dates[t] == frame.dates[t - 1]) {
      throw DataError(DataError::Kind::kDuplicateDate,
                      fmt::format("duplicate date {} at row {}", frame.dates[t].iso(), t));
    }
    if (frame.dates[t] < frame.dates[t - 1]) {
      throw DataError(DataError::Kind::kUnorderedDates, fmt::format("unordered dates at row {}", t));
    }
  }
  for (Eigen::Index t = 0; t < frame.prices.rows(); ++t) {
    for (Eigen::Index k = 0; k < frame.prices.cols(); ++k) {
      const double p = frame.prices(t, k);
      if (!std::isfinite(p) || p <= 0.0) {
        throw DataError(DataError::Kind::kNonPositivePrice,
                        fmt::format("non-positive price at (row {}, {})", t,
                                    frame.assets[static_cast<std::size_t>(k)]));
      }
    }
  }
}

PriceFrame load_price_csv(const std::filesystem::path& path) {
  auto csv = read_panel_csv(path);
  PriceFrame frame{std::move(csv.dates), std::move(csv.names), std::move(csv.values)};
  validate(frame);
  return frame;
}

SeriesFrame load_series_csv(const std::filesystem::path& path) {
  auto csv = read_panel_csv(path);
  return SeriesFrame{std::move(csv.dates), std::move(csv.names), std::move(csv.values)};
}

std::string format_series_csv(const std::vector<Date>& dates, const std::vector<std::string>& names,
                              const Panel& values) {
  std::string out = "date";
  for (const auto& n : names) {
    out += ',';
    out += n;
  }
  out += '\n';
  for (std::size_t t = 0; t < dates.size(); ++t) {
    out += dates[t].iso();
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
      out += ',';
      out += io::format_number(values(static_cast<Eigen::Index>(t), k));
    }
    out += '\n';
  }
  return out;
}

std::string format_price_csv(const PriceFrame& frame) {
  return format_series_csv(frame.dates, frame.assets, frame.prices);
}

void write_price_csv(const PriceFrame& frame, const std::filesystem::path& path) {
  io::write_file_atomic(path, format_price_csv(frame));
}

ReturnFrame compute_returns(const PriceFrame& frame) {
  if (frame.rows() < 2) {
    throw DataError(DataError::Kind::kInsufficientHistory,
                    "insufficient history: need at least 2 price rows");
  }
  ReturnFrame rf;
  rf.assets = frame.assets;
  rf.dates.assign(frame.dates.begin() + 1, frame.dates.end());
  const auto n = frame.prices.rows() - 1;
  rf.returns = frame.prices.bottomRows(n).array() / frame.prices.topRows(n).array() - 1.0;
  return rf;
}

VolFrame rolling_volatility(const ReturnFrame& returns, int window) {
  if (window < 2) {
    throw DataError(DataError::Kind::kInvalidArgument,
                    fmt::format("volatility window must be >= 2, got {}", window));
  }
  if (returns.rows() < static_cast<std::size_t>(window)) {
    throw DataError(DataError::Kind::kInsufficientHistory,
                    fmt::format("insufficient rows: window {} needs {} returns, have {}", window,
                                window, returns.rows()));
  }
  VolFrame vf;
  vf.dates = returns.dates;
  vf.assets = returns.assets;
  vf.window = window;
  const auto rows = returns.returns.rows();
  const auto cols = returns.returns.cols();
  vf.vols = Panel::Constant(rows, cols, std::numeric_limits<double>::quiet_NaN());
  const double d = window;
  for (Eigen::Index t = window - 1; t < rows; ++t) {
    for (Eigen::Index k = 0; k < cols; ++k) {
      double mean = 0.0;
      for (Eigen::Index u = t - window + 1; u <= t; ++u) mean += returns.returns(u, k);
      mean /= d;
      double ss = 0.0;
      for (Eigen::Index u = t - window + 1; u <= t; ++u) {
        const double e = returns.returns(u, k) - mean;
        ss += e * e;
      }
      vf.vols(t, k) = std::sqrt(ss / d);
    }
  }
  return vf;
}

std::vector<Date> business_days(Date start, std::size_t count) {
  std::vector<Date> out;
  out.reserve(count);
  Date d = start;
  while (out.size() < count) {
    if (!d.is_weekend()) out.push_back(d);
    d = d.add_days(1);
  }
  return out;
}

namespace {

void validate_spec(const SyntheticSpec& spec) {
  auto bad = [](const std::string& msg) {
    return DataError(DataError::Kind::kInvalidArgument, "invalid synthetic spec: " + msg);
  };
  if (spec.num_assets == 0) throw bad("num_assets must be >= 1");
  if (spec.num_steps == 0) throw bad("num_steps must be >= 1");
  if (spec.regimes.empty()) throw bad("at least one regime required");
  const auto m = static_cast<Eigen::Index>(spec.num_assets);
  for (std::size_t i = 0; i < spec.regimes.size(); ++i) {
    const auto& r = spec.regimes[i];
    if (r.mean.size() != m || r.vol.size() != m) {
      throw bad(fmt::format("regime {} moments must have {} entries", i, m));
    }
    if ((r.vol.array() < 0.0).any() || !r.vol.allFinite() || !r.mean.allFinite()) {
      throw bad(fmt::format("regime {} volatilities must be finite and >= 0", i));
    }
    if (!(r.correlation >= -1.0 && r.correlation <= 1.0)) {
      throw bad(fmt::format("regime {} correlation must lie in [-1, 1]", i));
    }
    if (!(r.expected_duration >= 1.0)) {
      throw bad(fmt::format("regime {} expected duration must be >= 1", i));
    }
  }
}

// Lower factor of the equicorrelation matrix. Semi-definite cases (rho = 1)
// fall back to LDLT so perfectly correlated assets are still representable.
Eigen::MatrixXd correlation_factor(std::size_t m, double rho) {
  Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(m),
                                                   static_cast<Eigen::Index>(m), rho);
  corr.diagonal().setOnes();
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  if (eig.eigenvalues().minCoeff() < -1e-12) {
    throw DataError(DataError::Kind::kInvalidArgument,
                    fmt::format("correlation {} is not attainable for {} assets", rho, m));
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

SyntheticPath generate_synthetic_path(const SyntheticSpec& spec) {
  validate_spec(spec);
  const auto m = static_cast<Eigen::Index>(spec.num_assets);
  std::vector<Eigen::MatrixXd> factors;
  for (const auto& r : spec.regimes) factors.push_back(correlation_factor(spec.num_assets, r.correlation));

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw_duration = [&](const Regime& r) {
    std::geometric_distribution<long> geo(1.0 / r.expected_duration);
    return geo(rng) + 1;
  };

  SyntheticPath path;
  auto& pf = path.prices;
  pf.dates = business_days(spec.start, spec.num_steps + 1);
  for (Eigen::Index k = 0; k < m; ++k) pf.assets.push_back(fmt::format("asset{}", k + 1));
  pf.prices.resize(static_cast<Eigen::Index>(spec.num_steps + 1), m);
  pf.prices.row(0).setConstant(100.0);
  path.regime.reserve(spec.num_steps);

  std::size_t current = 0;
  long remaining = draw_duration(spec.regimes[0]);
  Eigen::VectorXd z(m);
  for (std::size_t t = 0; t < spec.num_steps; ++t) {
    if (remaining == 0) {
      current = (current + 1) % spec.regimes.size();
      remaining = draw_duration(spec.regimes[current]);
    }
    --remaining;
    const auto& reg = spec.regimes[current];
    for (Eigen::Index k = 0; k < m; ++k) z(k) = normal(rng);
    const Eigen::VectorXd r = reg.mean + reg.vol.cwiseProduct(factors[current] * z);
    if ((r.array() <= -1.0).any()) {
      throw NumericError(fmt::format("synthetic return <= -100% at step {}", t));
    }
    const auto row = static_cast<Eigen::Index>(t);
    pf.prices.row(row + 1) = pf.prices.row(row).array() * (1.0 + r.transpose().array());
    path.regime.push_back(static_cast<int>(current));
  }
  return path;
}

PriceFrame generate_synthetic(const SyntheticSpec& spec) { return generate_synthetic_path(spec).prices; }

std::vector<std::string> scenario_names() { return {"calm", "two-regime", "crash"}; }

SyntheticSpec synthetic_scenario(std::string_view name, std::size_t assets, std::size_t steps,
                                 std::uint64_t seed) {
  if (assets == 0) throw UsageError("scenario needs at least one asset");
  const auto m = static_cast<Eigen::Index>(assets);
  SyntheticSpec spec;
  spec.num_assets = assets;
  spec.num_steps = steps;
  spec.seed = seed;
  auto flat = [&](double mean, double vol, double corr, double duration) {
    return Regime{Eigen::VectorXd::Constant(m, mean), Eigen::VectorXd::Constant(m, vol), corr, duration};
  };
  if (name == "calm") {
    spec.regimes = {flat(0.0003, 0.01, 0.3, static_cast<double>(std::max<std::size_t>(steps, 1)))};
  } else if (name == "two-regime") {
    if (assets < 2) throw UsageError("scenario 'two-regime' needs at least two assets");
    for (Eigen::Index k = 0; k < 2; ++k) {
      auto r = flat(-0.001, 0.025, 0.2, 250.0);
      r.mean(k) = 0.002;
      r.vol(k) = 0.005;
      spec.regimes.push_back(r);
    }
  } else if (name == "crash") {
    spec.regimes = {flat(0.0005, 0.007, 0.3, 250.0), flat(-0.004, 0.035, 0.7, 30.0)};
  } else {
    throw UsageError(fmt::format("unknown scenario '{}' (valid: {})", name, fmt::join(scenario_names(), ", ")));
  }
  return spec;
}

}  // namespace deepalloc

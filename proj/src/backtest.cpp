#include "deepalloc/backtest.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <exception>

#include "deepalloc/errors.hpp"
#include "deepalloc/random.hpp"

namespace deepalloc {

namespace {

DataError schedule_error(const std::string& what) {
  return DataError(DataError::Kind::kInvalidArgument, what);
}

AllocationPath empty_path(std::size_t first, std::size_t last, std::size_t m) {
  AllocationPath p;
  for (std::size_t t = first; t <= last; ++t) p.rows.push_back(t);
  p.weights.resize(static_cast<Eigen::Index>(p.rows.size()), static_cast<Eigen::Index>(m));
  p.leverage.resize(static_cast<Eigen::Index>(p.rows.size()));
  return p;
}

class TraditionalModel final : public AllocationModel {
 public:
  TraditionalModel(Method method, TraditionalOptions opts) : method_(method), opts_(std::move(opts)) {
    if (opts_.rebalance_every < 1) throw UsageError("rebalance frequency must be >= 1");
    if (!(opts_.leverage >= 0.0)) throw UsageError("leverage must be >= 0");
    if (!(opts_.target_fraction >= 0.0 && opts_.target_fraction <= 1.0)) {
      throw UsageError("target fraction must be in [0, 1]");
    }
  }

  std::string name() const override { return std::string(method_name(method_)); }

  FitResult fit_and_decide(const Dataset& data, const FitRequest& req) const override {
    const auto m = data.returns.num_assets();
    FitResult res{empty_path(req.first, req.last, m), std::nullopt};
    Weights w;
    for (std::size_t i = 0; i < res.path.size(); ++i) {
      const std::size_t t = res.path.rows[i];
      if (i % static_cast<std::size_t>(opts_.rebalance_every) == 0) w = solve_at(data, t);
      res.path.weights.row(static_cast<Eigen::Index>(i)) = w.transpose();
      res.path.leverage(static_cast<Eigen::Index>(i)) = opts_.leverage;
    }
    return res;
  }

 private:
  Weights solve_at(const Dataset& data, std::size_t t) const {
    const std::size_t lo =
        opts_.stats_window > 0 && t + 1 > opts_.stats_window ? t + 1 - opts_.stats_window : 0;
    auto stats = estimate_stats(data.returns.returns, static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(t));
    if (opts_.shrinkage > 0.0) stats = shrink_covariance(stats, opts_.shrinkage);
    MethodArgs args;
    const double f = opts_.target_fraction;
    if (method_ == Method::kMarkowitz) {
      args.r_min = stats.mu.minCoeff() + f * (stats.mu.maxCoeff() - stats.mu.minCoeff());
    } else if (method_ == Method::kMaxReturn) {
      args.sigma_max = stats.vols.minCoeff() + f * (stats.vols.maxCoeff() - stats.vols.minCoeff());
    }
    return allocate(method_, stats, args, opts_.solver).weights;
  }

  Method method_;
  TraditionalOptions opts_;
};

class EqualWeightModel final : public AllocationModel {
 public:
  explicit EqualWeightModel(double leverage) : leverage_(leverage) {
    if (!(leverage_ >= 0.0)) throw UsageError("leverage must be >= 0");
  }

  std::string name() const override { return "equalweight"; }

  FitResult fit_and_decide(const Dataset& data, const FitRequest& req) const override {
    const auto m = data.returns.num_assets();
    FitResult res{empty_path(req.first, req.last, m), std::nullopt};
    res.path.weights.setConstant(1.0 / static_cast<double>(m));
    res.path.leverage.setConstant(leverage_);
    return res;
  }

 private:
  double leverage_;
};

class DrlModel final : public AllocationModel {
 public:
  explicit DrlModel(DrlOptions opts) : opts_(std::move(opts)) { opts_.train.validate(); }

  std::string name() const override { return "drl"; }

  FitResult fit_and_decide(const Dataset& data, const FitRequest& req) const override {
    FitResult res;
    PolicyParameters params;
    if (opts_.checkpoint_dir) {
      params = load_policy(*opts_.checkpoint_dir / fmt::format("window_{}.ckpt", req.split_index), opts_.arch);
    } else {
      const std::size_t first_train = data.first_observable();
      if (req.train_last < first_train + 1) {
        throw DataError(DataError::Kind::kInsufficientHistory,
                        fmt::format("training window too short: returns through row {} but the first "
                                    "complete observation is row {}",
                                    req.train_last, first_train));
      }
      const auto window = make_episode_window(data.returns, data.vols, data.context, data.lags,
                                              data.context_lags, first_train, req.train_last - 1);
      TrainConfig cfg = opts_.train;
      cfg.seed = req.seed;
      res.trained = train(window, opts_.arch, cfg);
      params = res.trained->params;
    }
    const auto batch = build_observation_batch(data.returns, data.vols, data.context, data.lags,
                                               data.context_lags, req.first, req.last);
    const auto actions = forward_batch(params, batch.asset, batch.context);
    res.path.rows = batch.rows;
    res.path.weights = actions.weights;
    res.path.leverage = actions.leverage;
    return res;
  }

 private:
  DrlOptions opts_;
};

MetricRow metrics_of(std::span<const double> values) {
  MetricRow row;
  row.steps = values.size() - 1;
  if (!(values.front() > 0.0)) {
    row.annualized_return = Metric::of(-1.0);
    row.max_drawdown = Metric::of(1.0);
    return row;
  }
  row.annualized_return = annualized_return(values);
  row.sharpe = sharpe(values);
  row.sortino = sortino(values);
  row.max_drawdown = max_drawdown(values);
  return row;
}

}  // namespace

std::size_t Dataset::first_observable() const {
  return first_observable_row(vols, context, lags, context_lags);
}

Dataset make_dataset(const PriceFrame& prices, int vol_window, const LagSet& lags, const LagSet& context_lags,
                     const std::optional<SeriesFrame>& external_context) {
  Dataset d;
  d.returns = compute_returns(prices);
  d.vols = rolling_volatility(d.returns, vol_window);
  d.context = build_context_series(d.returns, d.vols);
  if (external_context) d.context = append_context(d.context, *external_context);
  d.lags = lags;
  d.context_lags = context_lags;
  return d;
}

WalkForwardSchedule make_schedule(const std::vector<Date>& dates, Date initial_train_end, TestSpan span) {
  if (dates.empty()) throw schedule_error("cannot schedule an empty date range");
  if (span.rows == 0 && span.months < 1) throw UsageError("test span must be at least one period");
  const auto train_end_it = std::upper_bound(dates.begin(), dates.end(), initial_train_end);
  if (train_end_it == dates.begin()) {
    throw schedule_error(fmt::format("initial train end {} precedes the first date {}", initial_train_end.iso(),
                                     dates.front().iso()));
  }
  if (train_end_it == dates.end()) {
    throw schedule_error(fmt::format("empty test region: initial train end {} is at or beyond the data end {}",
                                     initial_train_end.iso(), dates.back().iso()));
  }
  WalkForwardSchedule s;
  std::size_t next = static_cast<std::size_t>(train_end_it - dates.begin());
  for (int k = 1; next < dates.size(); ++k) {
    std::size_t end = next;
    if (span.rows > 0) {
      end = std::min(dates.size(), next + span.rows);
    } else {
      const Date boundary = initial_train_end.add_months(span.months * k);
      end = static_cast<std::size_t>(std::upper_bound(dates.begin(), dates.end(), boundary) - dates.begin());
      if (end <= next) continue;  // calendar period without any dates
    }
    s.splits.push_back({dates.front(), dates[next - 1], dates[next], dates[end - 1]});
    next = end;
  }
  return s;
}

void AllocationPath::append(const AllocationPath& other) {
  if (!rows.empty() && !other.rows.empty() && other.rows.front() != rows.back() + 1) {
    throw UsageError("allocation paths are not contiguous");
  }
  if (rows.empty()) {
    *this = other;
    return;
  }
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  Eigen::MatrixXd w(weights.rows() + other.weights.rows(), weights.cols());
  w << weights, other.weights;
  weights = std::move(w);
  Eigen::VectorXd l(leverage.size() + other.leverage.size());
  l << leverage, other.leverage;
  leverage = std::move(l);
}

EquityCurve run_strategy(const AllocationPath& path, const ReturnFrame& returns, const CostModel& costs,
                         const Eigen::VectorXd& initial) {
  if (!(costs.rate >= 0.0)) throw UsageError("cost rate must be >= 0");
  const auto m = static_cast<Eigen::Index>(returns.num_assets());
  if (path.size() == 0) throw UsageError("empty allocation path");
  if (path.weights.cols() != m || path.weights.rows() != static_cast<Eigen::Index>(path.size()) ||
      path.leverage.size() != path.weights.rows()) {
    throw UsageError("allocation path does not match the return frame");
  }
  Eigen::VectorXd prev = initial.size() == 0 ? Eigen::VectorXd::Zero(m) : initial;
  if (prev.size() != m) throw UsageError("initial allocation has the wrong size");

  EquityCurve c;
  c.dates.push_back(returns.dates.at(path.rows.front()));
  c.values.push_back(1.0);
  c.weights = path.weights;
  double value = 1.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const std::size_t t = path.rows[i];
    if (t + 1 >= returns.rows()) {
      throw DataError(DataError::Kind::kInsufficientHistory,
                      fmt::format("decision at row {} has no next-period return", t));
    }
    const auto row = static_cast<Eigen::Index>(i);
    const double lev = path.leverage(row);
    const Eigen::VectorXd alloc = lev * path.weights.row(row).transpose();
    const double turnover = (alloc - prev).cwiseAbs().sum();
    const double step = alloc.dot(returns.returns.row(static_cast<Eigen::Index>(t + 1)).transpose()) -
                        costs.rate * turnover;
    if (!c.bankrupt && step <= -1.0) {
      c.bankrupt = true;
      c.bankrupt_step = i;
    }
    value = c.bankrupt ? 0.0 : value * (1.0 + step);
    c.dates.push_back(returns.dates[t + 1]);
    c.values.push_back(value);
    c.leverage.push_back(lev);
    c.turnover.push_back(turnover);
    prev = alloc;
  }
  return c;
}

std::unique_ptr<AllocationModel> make_traditional_model(Method method, const TraditionalOptions& opts) {
  return std::make_unique<TraditionalModel>(method, opts);
}

std::unique_ptr<AllocationModel> make_equal_weight_model(double leverage) {
  return std::make_unique<EqualWeightModel>(leverage);
}

std::unique_ptr<AllocationModel> make_drl_model(const DrlOptions& opts) {
  return std::make_unique<DrlModel>(opts);
}

std::vector<std::string> model_names() {
  auto names = method_names();
  names.emplace_back("equalweight");
  names.emplace_back("drl");
  return names;
}

std::unique_ptr<AllocationModel> make_model(std::string_view name, const TraditionalOptions& traditional,
                                            const DrlOptions& drl, double equal_weight_leverage) {
  if (name == "drl") return make_drl_model(drl);
  if (name == "equalweight") return make_equal_weight_model(equal_weight_leverage);
  if (const auto method = parse_method(name)) return make_traditional_model(*method, traditional);
  throw UsageError(fmt::format("unknown model '{}' (valid: {})", name, fmt::join(model_names(), ", ")));
}

std::pair<std::size_t, std::size_t> test_rows(const ReturnFrame& returns, const Split& split) {
  const auto& d = returns.dates;
  const auto lo = std::lower_bound(d.begin(), d.end(), split.test_start);
  const auto hi = std::upper_bound(d.begin(), d.end(), split.test_end);
  if (lo == d.end() || lo >= hi) {
    throw DataError(DataError::Kind::kMisaligned,
                    fmt::format("test period {}..{} has no return rows", split.test_start.iso(),
                                split.test_end.iso()));
  }
  const auto first = static_cast<std::size_t>(lo - d.begin());
  if (first == 0) throw DataError(DataError::Kind::kInsufficientHistory, "test period starts at the first row");
  return {first, static_cast<std::size_t>(hi - d.begin()) - 1};
}

WalkForwardResult run_walk_forward(const AllocationModel& model, const Dataset& data,
                                   const WalkForwardSchedule& schedule, const BacktestConfig& cfg) {
  const std::size_t k_splits = schedule.splits.size();
  if (k_splits == 0) throw UsageError("schedule has no splits");
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (const auto& s : schedule.splits) ranges.push_back(test_rows(data.returns, s));

  std::vector<FitResult> fits(k_splits);
  std::vector<std::exception_ptr> errors(k_splits);
  const auto n = static_cast<long>(k_splits);
#pragma omp parallel for schedule(dynamic, 1)
  for (long k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    try {
      FitRequest req;
      req.train_last = ranges[i].first - 1;
      req.first = ranges[i].first - 1;
      req.last = ranges[i].second - 1;
      req.split_index = i;
      req.seed = derive_seed(cfg.seed, i);
      fits[i] = model.fit_and_decide(data, req);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  WalkForwardResult res;
  res.model = model.name();
  AllocationPath stitched;
  for (const auto& f : fits) stitched.append(f.path);
  res.curve = run_strategy(stitched, data.returns, cfg.costs);

  std::size_t offset = 0;
  for (std::size_t i = 0; i < k_splits; ++i) {
    SplitResult sr;
    sr.split = schedule.splits[i];
    sr.path = std::move(fits[i].path);
    sr.trained = std::move(fits[i].trained);
    const std::span<const double> seg(res.curve.values.data() + offset, sr.path.size() + 1);
    const auto m = metrics_of(seg);
    sr.annualized_return = m.annualized_return;
    sr.sharpe = m.sharpe;
    sr.sortino = m.sortino;
    sr.max_drawdown = m.max_drawdown;
    offset += sr.path.size();
    res.splits.push_back(std::move(sr));
  }
  return res;
}

std::string horizon_label(std::size_t steps) {
  if (steps == 0) return "full";
  if (steps % 252 == 0) return fmt::format("{}y", steps / 252);
  return fmt::format("{}d", steps);
}

MetricRow evaluate_curve(const EquityCurve& curve, std::size_t steps) {
  const std::size_t available = curve.values.size() - 1;
  if (steps > available) {
    throw DataError(DataError::Kind::kInsufficientHistory,
                    fmt::format("horizon {} ({} steps) exceeds the out-of-sample history of {} steps",
                                horizon_label(steps), steps, available));
  }
  const std::size_t n = steps == 0 ? available : steps;
  auto row = metrics_of(std::span<const double>(curve.values).last(n + 1));
  row.horizon = horizon_label(steps);
  return row;
}

PerformanceReport compare_models(const std::vector<const AllocationModel*>& models, const Dataset& data,
                                 const WalkForwardSchedule& schedule, const BacktestConfig& cfg) {
  if (models.empty()) throw UsageError("empty model list");
  std::size_t available = 0;
  for (const auto& s : schedule.splits) {
    const auto [a, b] = test_rows(data.returns, s);
    available += b - a + 1;
  }
  for (auto h : cfg.horizons) {
    if (h > available) {
      throw DataError(DataError::Kind::kInsufficientHistory,
                      fmt::format("horizon {} ({} steps) exceeds the out-of-sample history of {} steps",
                                  horizon_label(h), h, available));
    }
  }
  PerformanceReport report;
  for (const auto* model : models) {
    report.results.push_back(run_walk_forward(*model, data, schedule, cfg));
    const auto& curve = report.results.back().curve;
    auto add = [&](std::size_t h) {
      auto row = evaluate_curve(curve, h);
      row.model = model->name();
      report.rows.push_back(std::move(row));
    };
    for (auto h : cfg.horizons) add(h);
    add(0);
  }
  return report;
}

}  // namespace deepalloc

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deepalloc/allocators.hpp"
#include "deepalloc/features.hpp"
#include "deepalloc/metrics.hpp"
#include "deepalloc/trainer.hpp"

namespace deepalloc {

/// Everything a model may look at: returns, volatilities, context series and lag sets.
struct Dataset {
  ReturnFrame returns;
  VolFrame vols;
  SeriesFrame context;
  LagSet lags = LagSet::default_lags();
  LagSet context_lags = LagSet::default_lags();

  std::size_t first_observable() const;
};

/// Builds returns, rolling volatility and the derived context series, plus
/// optional external context matched by date.
Dataset make_dataset(const PriceFrame& prices, int vol_window, const LagSet& lags, const LagSet& context_lags,
                     const std::optional<SeriesFrame>& external_context = std::nullopt);

struct Split {
  Date train_start;
  Date train_end;
  Date test_start;
  Date test_end;
};

/// Test periods measured in calendar months, or in rows when `rows` > 0.
struct TestSpan {
  int months = 12;
  std::size_t rows = 0;
};

struct WalkForwardSchedule {
  std::vector<Split> splits;
};

/// Expanding-train splits over `dates` (sorted). Tests run back to back until
/// the data ends; the last one may be short.
WalkForwardSchedule make_schedule(const std::vector<Date>& dates, Date initial_train_end, TestSpan span);

/// Decisions for consecutive return rows. Row i decides at `rows[i]` and earns
/// the returns of row rows[i] + 1.
struct AllocationPath {
  std::vector<std::size_t> rows;
  Eigen::MatrixXd weights;  // (N, m), simplex rows
  Eigen::VectorXd leverage;

  std::size_t size() const { return rows.size(); }
  void append(const AllocationPath& other);
};

struct CostModel {
  double rate = 0.0005;  // per unit of leverage-scaled turnover
};

struct EquityCurve {
  std::vector<Date> dates;     // dates[0] is the first decision date, value 1
  std::vector<double> values;  // P_0 = 1, then one value per realized step
  Eigen::MatrixXd weights;     // (N, m) weights held over each step
  std::vector<double> leverage;
  std::vector<double> turnover;
  bool bankrupt = false;  // a step lost 100% or more; later values are 0
  std::size_t bankrupt_step = 0;
};

/// Sequential P&L: P_{i+1} = P_i (1 + lvg_i <p_i, r_{t_i+1}> - rate * turnover_i).
/// `initial` is the allocation held before the first step (cash when empty).
EquityCurve run_strategy(const AllocationPath& path, const ReturnFrame& returns, const CostModel& costs,
                         const Eigen::VectorXd& initial = {});

struct FitResult {
  AllocationPath path;
  std::optional<TrainedPolicy> trained;
};

/// Fit on return rows [0, train_last], then decide on rows [first, last].
struct FitRequest {
  std::size_t train_last = 0;
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t split_index = 0;
  std::uint64_t seed = 0;
};

/// Implementations must not read returns after the row they are deciding on.
class AllocationModel {
 public:
  virtual ~AllocationModel() = default;
  virtual std::string name() const = 0;
  virtual FitResult fit_and_decide(const Dataset& data, const FitRequest& req) const = 0;
};

struct TraditionalOptions {
  int rebalance_every = 21;     // rows between re-solves
  std::size_t stats_window = 0;  // trailing rows for mu/Sigma; 0 = all history up to the decision
  double leverage = 3.0;
  double target_fraction = 0.5;  // where r_min / sigma_max sit between the per-asset extremes
  double shrinkage = 0.0;
  SolverConfig solver;
};

std::unique_ptr<AllocationModel> make_traditional_model(Method method, const TraditionalOptions& opts);
std::unique_ptr<AllocationModel> make_equal_weight_model(double leverage = 1.0);

struct DrlOptions {
  NetworkArch arch;
  TrainConfig train;
  /// When set, split k loads `window_<k>.ckpt` from here instead of training.
  std::optional<std::filesystem::path> checkpoint_dir;
};

std::unique_ptr<AllocationModel> make_drl_model(const DrlOptions& opts);

/// The six allocator names plus "equalweight" and "drl".
std::vector<std::string> model_names();
/// Throws UsageError listing model_names() for an unknown name.
std::unique_ptr<AllocationModel> make_model(std::string_view name, const TraditionalOptions& traditional,
                                            const DrlOptions& drl, double equal_weight_leverage = 1.0);

struct BacktestConfig {
  CostModel costs;
  std::uint64_t seed = 0;
  std::vector<std::size_t> horizons{504, 1260};  // trailing steps; the full period is always added
};

/// Return rows covered by a split's test period (inclusive).
std::pair<std::size_t, std::size_t> test_rows(const ReturnFrame& returns, const Split& split);

struct SplitResult {
  Split split;
  AllocationPath path;
  std::optional<TrainedPolicy> trained;
  Metric annualized_return;
  Metric sharpe;
  Metric sortino;
  Metric max_drawdown;
};

struct WalkForwardResult {
  std::string model;
  EquityCurve curve;  // stitched out-of-sample curve
  std::vector<SplitResult> splits;
};

/// Phase 1 fits and decides every split (in parallel); phase 2 runs the
/// stitched path sequentially. Split k is seeded with derive_seed(seed, k).
WalkForwardResult run_walk_forward(const AllocationModel& model, const Dataset& data,
                                   const WalkForwardSchedule& schedule, const BacktestConfig& cfg);

struct MetricRow {
  std::string model;
  std::string horizon;  // "2y", "5y", "full", or "<n>d"
  std::size_t steps = 0;
  Metric annualized_return;
  Metric sortino;
  Metric sharpe;
  Metric max_drawdown;
};

struct PerformanceReport {
  std::vector<MetricRow> rows;
  std::vector<WalkForwardResult> results;
};

/// Metrics for the last `steps` steps of a curve (all when steps == 0).
MetricRow evaluate_curve(const EquityCurve& curve, std::size_t steps);

PerformanceReport compare_models(const std::vector<const AllocationModel*>& models, const Dataset& data,
                                 const WalkForwardSchedule& schedule, const BacktestConfig& cfg);

std::string horizon_label(std::size_t steps);

}  // namespace deepalloc

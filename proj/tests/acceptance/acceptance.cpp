// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
// Run: ./build/tests/deepalloc_acceptance [substring filter]

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "deepalloc/allocators.hpp"
#include "deepalloc/backtest.hpp"
#include "deepalloc/market_data.hpp"
#include "deepalloc/metrics.hpp"
#include "deepalloc/trainer.hpp"
#include "fixtures.hpp"
#include "grid_oracle.hpp"
#include "metric_oracle.hpp"

namespace {

using namespace deepalloc;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_abs_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

double relative_gap(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), std::numeric_limits<double>::min());
}

// Objective without the feasibility cut-off, so tiny constraint slack in the
// solver output does not read as an infinite gap.
double raw_objective(Method m, const CovarianceStats& s, const MethodArgs& args, const Eigen::VectorXd& w) {
  if (m == Method::kMarkowitz) return w.dot(s.sigma * w);
  if (m == Method::kMaxReturn) return -s.mu.dot(w);
  return testing::oracle_objective(m, s, args, w);
}

double constraint_violation(Method m, const CovarianceStats& s, const MethodArgs& args, const Eigen::VectorXd& w) {
  double v = std::max(std::abs(w.sum() - 1.0), std::max(0.0, -w.minCoeff()));
  if (m == Method::kMarkowitz) v = std::max(v, *args.r_min - s.mu.dot(w));
  if (m == Method::kMaxReturn) v = std::max(v, std::sqrt(w.dot(s.sigma * w)) - *args.sigma_max);
  return v;
}

// Markowitz targets placed inside the attainable range so that both constraints bind.
MethodArgs targets_for(const CovarianceStats& s) {
  const auto mv = solve_min_variance(s);
  MethodArgs args;
  args.r_min = 0.5 * (mv.weights.dot(s.mu) + s.mu.maxCoeff());
  args.sigma_max = std::sqrt(mv.objective_value) + 0.5 * (s.vols.maxCoeff() - std::sqrt(mv.objective_value));
  return args;
}

Outcome solver_matches_grid() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  const std::vector<Method> methods{Method::kMarkowitz,         Method::kMaxReturn,        Method::kMinVariance,
                                    Method::kMaxDiversification, Method::kMaxDecorrelation, Method::kRiskParity};
  std::vector<double> worst_w(methods.size(), 0.0);
  std::vector<double> worst_f(methods.size(), 0.0);
  int failures = 0;
  int solver_not_worse = 0;
  double worst_violation = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Eigen::Index l = 2 + k % 3;
    const auto s = testing::random_stats(rng, l);
    const auto args = targets_for(s);
    for (std::size_t j = 0; j < methods.size(); ++j) {
      const auto grid = testing::grid_search(methods[j], s, args, 0.005);
      const auto got = allocate(methods[j], s, args).weights;
      const double dw = max_abs_diff(got, grid.weights);
      const double f = raw_objective(methods[j], s, args, got);
      const double df = relative_gap(f, grid.objective);
      const double viol = constraint_violation(methods[j], s, args, got);
      worst_w[j] = std::max(worst_w[j], dw);
      worst_f[j] = std::max(worst_f[j], df);
      worst_violation = std::max(worst_violation, viol);
      if (f <= grid.objective + 1e-12 * std::abs(grid.objective)) ++solver_not_worse;
      if (!grid.found || dw > 0.01 || df > 1e-4 || viol > 1e-8) ++failures;
    }
  }
  const double secs = seconds_since(t0);
  std::string detail;
  for (std::size_t j = 0; j < methods.size(); ++j) {
    detail += fmt::format("{} dw={:.2e} df={:.2e}; ", method_name(methods[j]), worst_w[j], worst_f[j]);
  }
  detail += fmt::format("{} of 300 cases outside tolerance; solver objective <= grid objective in {} of 300; "
                        "max constraint violation {:.1e}; {:.1f}s",
                        failures, solver_not_worse, worst_violation, secs);
  return {failures == 0 && secs < 120.0, detail};
}

Outcome closed_forms() {
  Rng rng(7);
  std::uniform_real_distribution<double> vol(0.05, 0.4);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Eigen::Index l = 2 + k % 5;
    Eigen::VectorXd v(l);
    for (auto& x : v) x = vol(rng);
    const auto s = testing::diagonal_stats(v);
    const Eigen::VectorXd inv_var = v.cwiseAbs2().cwiseInverse();
    const Eigen::VectorXd inv_vol = v.cwiseInverse();
    worst = std::max(worst, max_abs_diff(solve_min_variance(s).weights, inv_var / inv_var.sum()));
    worst = std::max(worst, max_abs_diff(solve_max_diversification(s).weights, inv_vol / inv_vol.sum()));
    worst = std::max(worst, max_abs_diff(solve_risk_parity(s).weights, inv_vol / inv_vol.sum()));
    worst = std::max(worst, max_abs_diff(solve_max_decorrelation(s).weights,
                                         Eigen::VectorXd::Constant(l, 1.0 / static_cast<double>(l))));
  }
  return {worst <= 1e-3, fmt::format("max weight error {:.2e} over 20 diagonal instances", worst)};
}

Outcome equal_risk_contributions() {
  Rng rng(11);
  double worst = 1.0;
  for (int k = 0; k < 20; ++k) {
    const auto s = testing::random_stats(rng, 2 + k % 6);
    const auto rc = risk_contributions(solve_risk_parity(s).weights, s.sigma);
    worst = std::max(worst, rc.maxCoeff() / rc.minCoeff());
  }
  return {worst <= 1.001, fmt::format("worst max/min contribution ratio {:.9f}", worst)};
}

Outcome markowitz_duality() {
  Rng rng(13);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto s = testing::random_stats(rng, 2 + k % 4);
    const auto args = targets_for(s);
    // min-risk at r_min, then max-return at the volatility it reached.
    const auto w1 = solve_markowitz_min_risk(s, *args.r_min).weights;
    const auto w2 = solve_markowitz_max_return(s, std::sqrt(w1.dot(s.sigma * w1))).weights;
    worst = std::max(worst, max_abs_diff(w1, w2));
    // And the other way round.
    const auto v1 = solve_markowitz_max_return(s, *args.sigma_max).weights;
    const auto v2 = solve_markowitz_min_risk(s, v1.dot(s.mu)).weights;
    worst = std::max(worst, max_abs_diff(v1, v2));
  }
  return {worst <= 0.01, fmt::format("max weight gap {:.2e} over 20 instances, both directions", worst)};
}

Panel gaussian_returns(Eigen::Index rows, Eigen::Index m, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0005, 0.01);
  Panel r(rows, m);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < m; ++j) r(i, j) = n(rng);
  return r;
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const auto lags = LagSet::default_lags();
  const auto d = testing::dataset_from_returns(gaussian_returns(100, 2, 3), 20, lags, lags);
  const std::size_t first = d.first_observable();
  const auto w = make_episode_window(d.returns, d.vols, d.context, lags, lags, first, first + 9);
  auto p = init_network(NetworkArch{}, input_shape(w), 5);
  // Off the zero-initialized heads so every path carries gradient.
  Rng rng(6);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto& [name, t] : p.tensors)
    for (double& v : t.values()) v += u(rng);

  const auto analytic = episode_objective(p, w);
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t coords = 0;
  for (std::size_t a = 0; a < p.tensors.size(); ++a) {
    auto& t = p.tensors[a].second;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t[i];
      t[i] = orig + h;
      const double up = episode_objective(p, w).objective;
      t[i] = orig - h;
      const double down = episode_objective(p, w).objective;
      t[i] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double g = analytic.gradient[a][i];
      worst = std::max(worst, std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6}));
      ++coords;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0 && w.steps() == 10,
          fmt::format("{} coordinates, {} steps, worst relative error {:.2e}, {:.1f}s", coords, w.steps(), worst, secs)};
}

struct ScenarioRun {
  SyntheticPath path;
  Dataset data;
  WalkForwardResult drl;
  WalkForwardResult equal;
  std::vector<std::size_t> rows;  // decision row of each out-of-sample step
  Eigen::MatrixXd weights;
  Eigen::VectorXd leverage;
  double secs = 0.0;
};

ScenarioRun run_scenario(const std::string& name, std::size_t assets, std::uint64_t seed) {
  const auto t0 = Clock::now();
  ScenarioRun run;
  run.path = generate_synthetic_path(synthetic_scenario(name, assets, 2520, seed));
  const auto lags = LagSet::default_lags();
  run.data = make_dataset(run.path.prices, 20, lags, lags);
  const auto schedule = make_schedule(run.data.returns.dates, Date(2003, 12, 31), TestSpan{});
  DrlOptions drl;
  drl.train.seed = seed;
  BacktestConfig cfg;
  cfg.seed = seed;
  cfg.horizons.clear();
  run.drl = run_walk_forward(*make_drl_model(drl), run.data, schedule, cfg);
  run.equal = run_walk_forward(*make_equal_weight_model(1.0), run.data, schedule, cfg);
  AllocationPath all;
  for (const auto& s : run.drl.splits) all.append(s.path);
  run.rows = all.rows;
  run.weights = all.weights;
  run.leverage = all.leverage;
  run.secs = seconds_since(t0);
  return run;
}

Outcome drl_beats_equal_weight(const ScenarioRun& run) {
  const double drl = annualized_return(run.drl.curve.values).value;
  const double eq = annualized_return(run.equal.curve.values).value;
  // Steps that trade a row at least 25 rows into its regime.
  double dominant = 0.0;
  std::size_t counted = 0;
  const auto& regime = run.path.regime;
  for (std::size_t i = 0; i < run.rows.size(); ++i) {
    const std::size_t traded = run.rows[i] + 1;
    std::size_t since = 0;
    while (since < traded && regime[traded - since - 1] == regime[traded]) ++since;
    if (since < 25) continue;
    dominant += run.weights(static_cast<Eigen::Index>(i), regime[traded]);
    ++counted;
  }
  dominant /= static_cast<double>(std::max<std::size_t>(counted, 1));
  const bool pass = drl - eq >= 0.02 && dominant > 0.6 && counted > 0 && run.secs < 600.0;
  return {pass, fmt::format("DRL {:.2f}% vs equal weight {:.2f}% annualized; dominant-asset weight {:.1f}% over "
                            "{} in-regime steps; {:.0f}s",
                            100 * drl, 100 * eq, 100 * dominant, counted, run.secs)};
}

Outcome crash_deleveraging(const ScenarioRun& run) {
  double sum[2] = {0.0, 0.0};
  std::size_t n[2] = {0, 0};
  for (std::size_t i = 0; i < run.rows.size(); ++i) {
    const int r = run.path.regime[run.rows[i]];
    sum[r] += run.leverage(static_cast<Eigen::Index>(i));
    ++n[r];
  }
  const double calm = sum[0] / static_cast<double>(std::max<std::size_t>(n[0], 1));
  const double crash = sum[1] / static_cast<double>(std::max<std::size_t>(n[1], 1));
  return {n[0] > 0 && n[1] > 0 && crash < calm,
          fmt::format("mean leverage {:.3f} over {} crash steps vs {:.3f} over {} calm steps; {:.0f}s", crash, n[1],
                      calm, n[0], run.secs)};
}

Outcome metric_oracles() {
  Rng rng(31);
  std::uniform_int_distribution<int> len(2, 600);
  std::uniform_real_distribution<double> drift(-0.002, 0.002);
  std::uniform_real_distribution<double> vol(0.0, 0.03);
  double worst = 0.0;
  int mismatched_definedness = 0;
  auto compare = [&](const Metric& m, std::optional<double> want) {
    if (m.defined != want.has_value()) {
      ++mismatched_definedness;
      return;
    }
    if (want) worst = std::max(worst, std::abs(m.value - *want));
  };
  for (int k = 0; k < 100; ++k) {
    std::normal_distribution<double> step(drift(rng), vol(rng));
    std::vector<double> v{1.0};
    const int steps = len(rng);
    for (int i = 0; i < steps; ++i) v.push_back(v.back() * (1.0 + step(rng)));
    compare(annualized_return(v), testing::oracle_annualized_return(v));
    compare(sharpe(v), testing::oracle_sharpe(v));
    compare(sortino(v), testing::oracle_sortino(v));
    compare(max_drawdown(v), testing::oracle_max_drawdown(v));
  }
  const std::vector<double> example{100, 120, 90, 110};
  const auto dd = max_drawdown(example);
  const bool exact = dd.defined && dd.value == 0.25;
  return {worst <= 1e-10 && mismatched_definedness == 0 && exact,
          fmt::format("worst |diff| {:.2e} over 100 curves x 4 metrics; [100,120,90,110] drawdown {}", worst,
                      format_metric(dd, 17))};
}

Outcome walk_forward_count() {
  std::vector<Date> dates;
  for (Date d(2000, 1, 3); d <= Date(2020, 6, 19); d = d.add_days(1)) {
    if (!d.is_weekend()) dates.push_back(d);
  }
  const auto s = make_schedule(dates, Date(2006, 12, 31), TestSpan{});
  return {s.splits.size() == 14,
          fmt::format("{} splits, first test {}..{}, last test {}..{}", s.splits.size(), s.splits.front().test_start.iso(),
                      s.splits.front().test_end.iso(), s.splits.back().test_start.iso(),
                      s.splits.back().test_end.iso())};
}

std::vector<fs::path> files_under(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome cli_determinism() {
  const auto root = testing::fresh_dir("acceptance_cli");
  const auto data = root / "data";
  const std::string prices = (data / "prices.csv").string();
  const std::string run_opts =
      " --prices " + prices +
      " --initial-train-end 2002-12-31 --test-months 6 --max-iterations 40 --vol-window 10";
  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "synth --synth-steps 1000 --synth-scenario crash --seed 3"},
      {"ingest", "ingest --prices " + prices},
      {"allocate", "allocate --method maxdiversification --prices " + prices},
      {"train", "train" + run_opts},
      {"backtest", "backtest --model drl --horizons 126" + run_opts},
      {"compare", "compare --models drl,riskparity,markowitz,equalweight --horizons 126" + run_opts},
  };
  std::size_t files = 0;
  std::vector<std::string> problems;
  auto rerun = [&](const std::string& name, const std::string& args) {
    const auto first = name == "synth" ? data : root / name;
    const auto second = root / (name + "_rerun");
    if (testing::run_cli(args + " --output " + first.string()) != 0) {
      problems.push_back(name + " failed");
      return;
    }
    if (testing::run_cli(name + " --config " + (first / "manifest.txt").string() + " --output " + second.string()) !=
        0) {
      problems.push_back(name + " rerun failed");
      return;
    }
    const auto a = files_under(first);
    if (a != files_under(second)) problems.push_back(name + ": different file sets");
    for (const auto& f : a) {
      ++files;
      if (testing::slurp(first / f) != testing::slurp(second / f)) problems.push_back(name + ": " + f.string());
    }
  };
  for (const auto& [name, args] : commands) rerun(name, args);
  rerun("plot", "plot --equity " + (root / "compare" / "equity.csv").string() + " --weights " +
                    (root / "compare" / "weights_drl.csv").string());
  std::string detail = fmt::format("7 commands, {} files compared", files);
  for (const auto& p : problems) detail += "; differs: " + p;
  return {problems.empty() && files > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string filter = argc > 1 ? argv[1] : "";
  int failed = 0;
  auto report = [&](const std::string& name, const std::function<Outcome()>& check) {
    if (!filter.empty() && name.find(filter) == std::string::npos) return;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    fmt::print("{} {}: {}\n", o.pass ? "PASS" : "FAIL", name, o.detail);
    std::fflush(stdout);
  };

  report("solver-grid-equivalence", solver_matches_grid);
  report("closed-form-allocations", closed_forms);
  report("risk-parity-erc", equal_risk_contributions);
  report("markowitz-duality", markowitz_duality);
  report("episode-gradient-fd", gradient_check);
  std::optional<ScenarioRun> two_regime;
  report("drl-two-regime", [&] {
    two_regime = run_scenario("two-regime", 2, 21);
    return drl_beats_equal_weight(*two_regime);
  });
  report("drl-crash-deleveraging", [&] { return crash_deleveraging(run_scenario("crash", 3, 22)); });
  report("metric-oracles", metric_oracles);
  report("walk-forward-14-splits", walk_forward_count);
  report("cli-determinism", cli_determinism);
  return failed == 0 ? 0 : 1;
}

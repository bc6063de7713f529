#include "deepalloc/cli/config.hpp"

#include <fmt/format.h>

#include <charconv>

#include "deepalloc/errors.hpp"
#include "deepalloc/io.hpp"

namespace deepalloc::cli {

namespace {

// Informational keys written into manifests and ignored on load.
bool manifest_only(std::string_view key) { return key == "command" || key == "version"; }

template <typename T>
T parse_integer(std::string_view text, const std::string& key) {
  T v{};
  const auto s = io::trim(text);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw UsageError(fmt::format("config key '{}': '{}' is not an integer", key, s));
  }
  return v;
}

}  // namespace

const std::vector<KeySpec>& known_keys() {
  static const std::vector<KeySpec> keys{
      {"prices", "", "price CSV (date column then one column per asset)"},
      {"context", "", "optional external context CSV, matched by date"},
      {"output", "out", "output directory"},
      {"seed", "42", "global seed; every random stream derives from it"},
      {"vol_window", "20", "rolling volatility window in rows"},
      {"lags", "0,1,2,3,4,20,60", "asset observation lags"},
      {"context_lags", "0,1,2,3,4,20,60", "context observation lags"},
      {"asset_conv", "5x3,10x3", "asset branch conv layers, FILTERSxKERNEL"},
      {"context_conv", "3x3", "context branch conv layer, FILTERSxKERNEL"},
      {"hidden", "", "dense layer sizes after concatenation, comma separated"},
      {"asset_mode", "lags1d", "asset convolution: lags1d or grid2d"},
      {"asset_kernel_rows", "1", "grid2d kernel extent along assets"},
      {"max_leverage", "3", "upper bound of the leverage head"},
      {"l2_coeff", "1e-8", "L2 coefficient on weight tensors"},
      {"learning_rate", "0.01", "Adam learning rate"},
      {"noise_std", "0.002", "observation noise std during training"},
      {"max_iterations", "500", "training iterations per window"},
      {"patience", "50", "iterations without improvement before stopping"},
      {"policy_prob", "0.9", "probability of acting with the policy instead of at random"},
      {"adam_beta1", "0.9", "Adam first-moment decay"},
      {"adam_beta2", "0.999", "Adam second-moment decay"},
      {"adam_epsilon", "1e-8", "Adam denominator offset"},
      {"objective", "net", "training objective: net, sharpe or sortino"},
      {"solver_max_iters", "20000", "allocator iteration cap"},
      {"solver_tolerance", "1e-10", "allocator stationarity tolerance"},
      {"solver_restarts", "5", "allocator multi-start count"},
      {"shrinkage", "0", "covariance shrinkage toward its diagonal, in [0, 1]"},
      {"initial_train_end", "2006-12-31", "last date of the first training window"},
      {"test_months", "12", "test period length in months"},
      {"test_rows", "0", "test period length in rows (overrides test_months when > 0)"},
      {"cost_rate", "0.0005", "cost per unit of leverage-scaled turnover"},
      {"rebalance_every", "21", "rows between allocator re-solves"},
      {"stats_window", "0", "trailing rows for allocator statistics (0 = all history)"},
      {"leverage", "3", "leverage applied to the traditional allocators"},
      {"target_fraction", "0.5", "backtest markowitz/maxreturn target between per-asset extremes"},
      {"equalweight_leverage", "1", "leverage of the equal-weight benchmark"},
      {"horizons", "504,1260", "trailing report horizons in rows (full period always added)"},
      {"plots", "true", "write SVG charts"},
      {"checkpoint_dir", "", "load DRL windows from here instead of training"},
      {"method", "", "allocator for the allocate command"},
      {"r_min", "", "markowitz return floor"},
      {"sigma_max", "", "maxreturn volatility bound"},
      {"window", "0", "allocate: trailing rows for statistics (0 = all)"},
      {"model", "drl", "backtest: model name"},
      {"models", "drl,riskparity,markowitz", "compare: model names"},
      {"synth_scenario", "two-regime", "synth: calm, two-regime or crash"},
      {"synth_assets", "4", "synth: number of assets"},
      {"synth_steps", "2520", "synth: number of returns"},
      {"synth_start", "2000-01-03", "synth: first date"},
      {"equity", "", "plot: equity CSV"},
      {"weights", "", "plot: weights CSV"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : known_keys()) values_[k.key] = k.default_value;
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig c;
  std::size_t line_no = 0;
  for (const auto& raw : io::split(text, '\n')) {
    ++line_no;
    const auto line = io::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError(fmt::format("config line {}: expected key = value", line_no));
    }
    const std::string key(io::trim(line.substr(0, eq)));
    if (manifest_only(key)) continue;
    c.set(key, std::string(io::trim(line.substr(eq + 1))));
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

void RunConfig::set(const std::string& key, std::string value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError(fmt::format("unknown config key '{}'", key));
  it->second = std::move(value);
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError(fmt::format("unknown config key '{}'", key));
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  try {
    return io::parse_double(get(key));
  } catch (const DataError&) {
    throw UsageError(fmt::format("config key '{}': '{}' is not a number", key, get(key)));
  }
}

long RunConfig::get_int(const std::string& key) const { return parse_integer<long>(get(key), key); }

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  return parse_integer<std::uint64_t>(get(key), key);
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError(fmt::format("config key '{}': '{}' is not a boolean", key, v));
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  if (get(key).empty()) return out;
  for (const auto& part : io::split(get(key), ',')) {
    const auto t = io::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

LagSet RunConfig::lags() const { return LagSet::parse(get("lags")); }
LagSet RunConfig::context_lags() const { return LagSet::parse(get("context_lags")); }

NetworkArch RunConfig::arch() const {
  NetworkArch a;
  a.asset_conv = parse_conv_layers(get("asset_conv"));
  const auto ctx = parse_conv_layers(get("context_conv"));
  if (ctx.size() != 1) throw UsageError("context_conv takes exactly one layer");
  a.context_conv = ctx.front();
  for (const auto& h : get_list("hidden")) {
    a.hidden.push_back(parse_integer<std::size_t>(h, "hidden"));
  }
  const auto& mode = get("asset_mode");
  if (mode == "lags1d") {
    a.asset_mode = AssetConvMode::kLags1D;
  } else if (mode == "grid2d") {
    a.asset_mode = AssetConvMode::kGrid2D;
  } else {
    throw UsageError(fmt::format("asset_mode must be lags1d or grid2d, got '{}'", mode));
  }
  a.asset_kernel_rows = parse_integer<std::size_t>(get("asset_kernel_rows"), "asset_kernel_rows");
  a.max_leverage = get_double("max_leverage");
  a.l2_coeff = get_double("l2_coeff");
  return a;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.learning_rate = get_double("learning_rate");
  t.noise_std = get_double("noise_std");
  t.max_iterations = static_cast<int>(get_int("max_iterations"));
  t.early_stop_patience = static_cast<int>(get_int("patience"));
  t.policy_prob = get_double("policy_prob");
  t.beta1 = get_double("adam_beta1");
  t.beta2 = get_double("adam_beta2");
  t.epsilon = get_double("adam_epsilon");
  t.objective = parse_objective(get("objective"));
  t.seed = get_u64("seed");
  t.validate();
  return t;
}

SolverConfig RunConfig::solver() const {
  SolverConfig s;
  s.max_iters = static_cast<int>(get_int("solver_max_iters"));
  s.tolerance = get_double("solver_tolerance");
  s.restarts = static_cast<int>(get_int("solver_restarts"));
  s.seed = get_u64("seed");
  if (s.max_iters < 1 || s.restarts < 1 || !(s.tolerance > 0.0)) {
    throw UsageError("solver iterations and restarts must be >= 1 and tolerance > 0");
  }
  return s;
}

TraditionalOptions RunConfig::traditional() const {
  TraditionalOptions o;
  o.rebalance_every = static_cast<int>(get_int("rebalance_every"));
  o.stats_window = parse_integer<std::size_t>(get("stats_window"), "stats_window");
  o.leverage = get_double("leverage");
  o.target_fraction = get_double("target_fraction");
  o.shrinkage = get_double("shrinkage");
  o.solver = solver();
  return o;
}

DrlOptions RunConfig::drl() const {
  DrlOptions d;
  d.arch = arch();
  d.train = train();
  if (is_set("checkpoint_dir")) d.checkpoint_dir = std::filesystem::path(get("checkpoint_dir"));
  return d;
}

TestSpan RunConfig::test_span() const {
  TestSpan s;
  s.months = static_cast<int>(get_int("test_months"));
  s.rows = parse_integer<std::size_t>(get("test_rows"), "test_rows");
  return s;
}

Date RunConfig::initial_train_end() const {
  try {
    return Date::parse(get("initial_train_end"));
  } catch (const DataError&) {
    throw UsageError(fmt::format("initial_train_end '{}' is not a YYYY-MM-DD date", get("initial_train_end")));
  }
}

BacktestConfig RunConfig::backtest() const {
  BacktestConfig b;
  b.costs.rate = get_double("cost_rate");
  if (!(b.costs.rate >= 0.0)) throw UsageError("cost_rate must be >= 0");
  b.seed = get_u64("seed");
  b.horizons.clear();
  for (const auto& h : get_list("horizons")) b.horizons.push_back(parse_integer<std::size_t>(h, "horizons"));
  return b;
}

std::string RunConfig::format() const {
  std::string out;
  for (const auto& k : known_keys()) {
    if (k.key == "output") continue;
    out += fmt::format("{} = {}\n", k.key, get(k.key));
  }
  return out;
}

std::string format_manifest(std::string_view command, const RunConfig& config) {
  return fmt::format("# deepalloc run manifest; rerun with --config <this file>\ncommand = {}\nversion = {}\n{}",
                     command, DEEPALLOC_VERSION, config.format());
}

}  // namespace deepalloc::cli

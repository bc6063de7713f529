#include "deepalloc/cli/commands.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>

#include "deepalloc/errors.hpp"
#include "deepalloc/io.hpp"
#include "deepalloc/report.hpp"

namespace deepalloc::cli {

namespace fs = std::filesystem;

namespace {

fs::path output_dir(const RunConfig& cfg) {
  const fs::path out(cfg.get("output"));
  fs::create_directories(out);
  return out;
}

void write_manifest(const fs::path& out, std::string_view command, const RunConfig& cfg) {
  io::write_file_atomic(out / "manifest.txt", format_manifest(command, cfg));
}

PriceFrame load_prices(const RunConfig& cfg) {
  if (!cfg.is_set("prices")) throw UsageError("missing --prices");
  return load_price_csv(cfg.get("prices"));
}

Dataset load_dataset(const RunConfig& cfg) {
  const auto prices = load_prices(cfg);
  std::optional<SeriesFrame> external;
  if (cfg.is_set("context")) external = load_series_csv(cfg.get("context"));
  return make_dataset(prices, static_cast<int>(cfg.get_int("vol_window")), cfg.lags(), cfg.context_lags(),
                      external);
}

WalkForwardSchedule load_schedule(const RunConfig& cfg, const Dataset& data) {
  return make_schedule(data.returns.dates, cfg.initial_train_end(), cfg.test_span());
}

void write_trained(const fs::path& out, const WalkForwardResult& res) {
  for (std::size_t k = 0; k < res.splits.size(); ++k) {
    const auto& trained = res.splits[k].trained;
    if (!trained) continue;
    fs::create_directories(out / "checkpoints");
    fs::create_directories(out / "logs");
    save_policy(trained->params, out / "checkpoints" / fmt::format("window_{}.ckpt", k));
    io::write_file_atomic(out / "logs" / fmt::format("train_log_{}.csv", k), format_train_log(trained->log));
  }
}

Panel to_panel(const std::vector<WalkForwardResult>& results) {
  const auto n = static_cast<Eigen::Index>(results.front().curve.values.size());
  Panel p(n, static_cast<Eigen::Index>(results.size()));
  for (std::size_t j = 0; j < results.size(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i, static_cast<Eigen::Index>(j)) = results[j].curve.values[static_cast<std::size_t>(i)];
    }
  }
  return p;
}

std::vector<Date> step_dates(const EquityCurve& c) {
  return {c.dates.begin(), c.dates.end() - 1};
}

void write_report(const fs::path& out, const RunConfig& cfg, const Dataset& data, const PerformanceReport& report) {
  io::write_file_atomic(out / "metrics.csv", format_metrics_csv(report.rows));
  const auto table = format_metrics_table(report.rows);
  io::write_file_atomic(out / "metrics.txt", table);
  io::write_file_atomic(out / "splits.csv", format_split_csv(report.results));
  io::write_file_atomic(out / "equity.csv", format_equity_csv(report.results));
  const bool plots = cfg.get_bool("plots");
  std::vector<std::string> names;
  for (const auto& res : report.results) {
    names.push_back(res.model);
    io::write_file_atomic(out / fmt::format("weights_{}.csv", res.model),
                          format_weights_csv(res.curve, data.returns.assets));
    write_trained(out, res);
    if (plots) {
      io::write_file_atomic(out / fmt::format("weights_{}.svg", res.model),
                            svg_stacked_area(fmt::format("Weights: {}", res.model), step_dates(res.curve),
                                             data.returns.assets, res.curve.weights));
    }
  }
  if (plots) {
    io::write_file_atomic(out / "equity.svg", svg_line_chart("Out-of-sample equity", report.results.front().curve.dates,
                                                             names, to_panel(report.results)));
  }
  std::cout << table;
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

}  // namespace

void cmd_ingest(const RunConfig& cfg) {
  const auto data = load_dataset(cfg);
  const auto out = output_dir(cfg);
  const auto prices = load_prices(cfg);
  write_price_csv(prices, out / "prices.csv");
  io::write_file_atomic(out / "returns.csv",
                        format_series_csv(data.returns.dates, data.returns.assets, data.returns.returns));
  const auto w = static_cast<Eigen::Index>(data.vols.window - 1);
  if (data.vols.vols.rows() > w) {
    const std::vector<Date> d(data.vols.dates.begin() + w, data.vols.dates.end());
    io::write_file_atomic(out / "vols.csv",
                          format_series_csv(d, data.vols.assets, data.vols.vols.bottomRows(data.vols.vols.rows() - w)));
  }
  write_manifest(out, "ingest", cfg);
  fmt::print("{} rows, {} assets, {} .. {}\n", prices.rows(), prices.num_assets(), prices.dates.front().iso(),
             prices.dates.back().iso());
  fmt::print("first observable return row: {} ({})\n", data.first_observable(),
             data.returns.dates.at(data.first_observable()).iso());
}

void cmd_synth(const RunConfig& cfg) {
  auto spec = synthetic_scenario(cfg.get("synth_scenario"), static_cast<std::size_t>(cfg.get_int("synth_assets")),
                                 static_cast<std::size_t>(cfg.get_int("synth_steps")), cfg.get_u64("seed"));
  try {
    spec.start = Date::parse(cfg.get("synth_start"));
  } catch (const DataError&) {
    throw UsageError(fmt::format("synth_start '{}' is not a YYYY-MM-DD date", cfg.get("synth_start")));
  }
  const auto path = generate_synthetic_path(spec);
  const auto out = output_dir(cfg);
  write_price_csv(path.prices, out / "prices.csv");
  std::string regimes = "date,regime\n";
  for (std::size_t t = 0; t < path.regime.size(); ++t) {
    regimes += fmt::format("{},{}\n", path.prices.dates[t + 1].iso(), path.regime[t]);
  }
  io::write_file_atomic(out / "regimes.csv", regimes);
  write_manifest(out, "synth", cfg);
  fmt::print("wrote {} rows x {} assets to {}\n", path.prices.rows(), path.prices.num_assets(),
             (out / "prices.csv").string());
}

void cmd_allocate(const RunConfig& cfg) {
  if (!cfg.is_set("method")) throw UsageError(fmt::format("missing --method (valid: {})", fmt::join(method_names(), ", ")));
  const auto method = parse_method(cfg.get("method"));
  if (!method) {
    throw UsageError(fmt::format("unknown method '{}' (valid: {})", cfg.get("method"), fmt::join(method_names(), ", ")));
  }
  MethodArgs args;
  if (cfg.is_set("r_min")) args.r_min = cfg.get_double("r_min");
  if (cfg.is_set("sigma_max")) args.sigma_max = cfg.get_double("sigma_max");
  // Check required targets before touching data so usage errors win.
  if (*method == Method::kMarkowitz && !args.r_min) throw UsageError("missing --r-min");
  if (*method == Method::kMaxReturn && !args.sigma_max) throw UsageError("missing --sigma-max");

  const auto prices = load_prices(cfg);
  const auto returns = compute_returns(prices);
  const auto window = static_cast<std::size_t>(cfg.get_int("window"));
  auto stats = estimate_stats(returns, window > 0 ? std::optional<std::size_t>(window) : std::nullopt);
  const double shrink = cfg.get_double("shrinkage");
  if (shrink > 0.0) stats = shrink_covariance(stats, shrink);
  const auto rep = allocate(*method, stats, args, cfg.solver());

  const auto out = output_dir(cfg);
  std::string csv = "asset,weight\n";
  for (std::size_t i = 0; i < returns.assets.size(); ++i) {
    csv += fmt::format("{},{}\n", returns.assets[i], io::format_number(rep.weights(static_cast<Eigen::Index>(i))));
  }
  io::write_file_atomic(out / "weights.csv", csv);
  write_manifest(out, "allocate", cfg);

  fmt::print("method: {}\n", method_name(*method));
  fmt::print("converged: {} ({} iterations, stationarity {:.3e})\n", yes_no(rep.converged), rep.iterations,
             rep.stationarity);
  fmt::print("objective: {}\n", io::format_number(rep.objective_value));
  fmt::print("weights:\n");
  for (std::size_t i = 0; i < returns.assets.size(); ++i) {
    fmt::print("  {:<12} {:.6f}\n", returns.assets[i], rep.weights(static_cast<Eigen::Index>(i)));
  }
  fmt::print("active constraints: {}\n", rep.active_constraints.empty() ? "none" : fmt::format("{}", fmt::join(rep.active_constraints, ", ")));
  fmt::print("non-unique optimum: {}\n", yes_no(rep.non_unique));
}

void cmd_train(const RunConfig& cfg) {
  const auto data = load_dataset(cfg);
  const auto schedule = load_schedule(cfg, data);
  auto drl = cfg.drl();
  drl.checkpoint_dir.reset();
  const auto model = make_drl_model(drl);
  const auto res = run_walk_forward(*model, data, schedule, cfg.backtest());
  const auto out = output_dir(cfg);
  write_trained(out, res);
  std::string summary = "window,train_start,train_end,iterations,best_iteration,best_objective,early_stopped\n";
  for (std::size_t k = 0; k < res.splits.size(); ++k) {
    const auto& s = res.splits[k];
    summary += fmt::format("{},{},{},{},{},{},{}\n", k, s.split.train_start.iso(), s.split.train_end.iso(),
                           s.trained->log.size(), s.trained->best_iteration,
                           io::format_number(s.trained->best_objective), s.trained->early_stopped ? 1 : 0);
  }
  io::write_file_atomic(out / "train_summary.csv", summary);
  write_manifest(out, "train", cfg);
  fmt::print("{}", summary);
}

void cmd_backtest(const RunConfig& cfg) {
  const auto data = load_dataset(cfg);
  const auto schedule = load_schedule(cfg, data);
  const auto model = make_model(cfg.get("model"), cfg.traditional(), cfg.drl(), cfg.get_double("equalweight_leverage"));
  const auto report = compare_models({model.get()}, data, schedule, cfg.backtest());
  const auto out = output_dir(cfg);
  write_report(out, cfg, data, report);
  write_manifest(out, "backtest", cfg);
}

void cmd_compare(const RunConfig& cfg) {
  const auto names = cfg.get_list("models");
  if (names.empty()) throw UsageError("empty model list");
  const auto traditional = cfg.traditional();
  const auto drl = cfg.drl();
  std::vector<std::unique_ptr<AllocationModel>> models;
  std::vector<const AllocationModel*> ptrs;
  for (const auto& n : names) {
    models.push_back(make_model(n, traditional, drl, cfg.get_double("equalweight_leverage")));
    ptrs.push_back(models.back().get());
  }
  const auto data = load_dataset(cfg);
  const auto schedule = load_schedule(cfg, data);
  const auto report = compare_models(ptrs, data, schedule, cfg.backtest());
  const auto out = output_dir(cfg);
  write_report(out, cfg, data, report);
  write_manifest(out, "compare", cfg);
}

void cmd_plot(const RunConfig& cfg) {
  if (!cfg.is_set("equity") && !cfg.is_set("weights")) throw UsageError("plot needs --equity and/or --weights");
  const auto out = output_dir(cfg);
  if (cfg.is_set("equity")) {
    const auto eq = load_series_csv(cfg.get("equity"));
    io::write_file_atomic(out / "equity.svg", svg_line_chart("Out-of-sample equity", eq.dates, eq.names, eq.values));
  }
  if (cfg.is_set("weights")) {
    const auto w = load_series_csv(cfg.get("weights"));
    // Drop the leverage and turnover columns written by the backtest.
    std::vector<std::string> names;
    std::vector<Eigen::Index> cols;
    for (std::size_t j = 0; j < w.names.size(); ++j) {
      if (w.names[j] == "leverage" || w.names[j] == "turnover") continue;
      names.push_back(w.names[j]);
      cols.push_back(static_cast<Eigen::Index>(j));
    }
    Panel p(w.values.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) p.col(static_cast<Eigen::Index>(j)) = w.values.col(cols[j]);
    io::write_file_atomic(out / "weights.svg", svg_stacked_area("Weights", w.dates, names, p));
  }
  write_manifest(out, "plot", cfg);
}

namespace {

struct Command {
  std::string name;
  std::string help;
  std::vector<std::string> keys;
  std::function<void(const RunConfig&)> fn;
};

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> groups) {
  std::vector<std::string> out;
  for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
  return out;
}

std::vector<Command> commands() {
  const std::vector<std::string> common{"output", "seed"};
  const std::vector<std::string> data{"prices", "context", "vol_window", "lags", "context_lags"};
  const std::vector<std::string> arch{"asset_conv", "context_conv", "hidden", "asset_mode",
                                      "asset_kernel_rows", "max_leverage", "l2_coeff"};
  const std::vector<std::string> train{"learning_rate", "noise_std", "max_iterations", "patience", "policy_prob",
                                       "adam_beta1", "adam_beta2", "adam_epsilon", "objective"};
  const std::vector<std::string> solver{"solver_max_iters", "solver_tolerance", "solver_restarts", "shrinkage"};
  const std::vector<std::string> schedule{"initial_train_end", "test_months", "test_rows"};
  const std::vector<std::string> backtest{"cost_rate", "rebalance_every", "stats_window", "leverage",
                                          "target_fraction", "equalweight_leverage", "horizons", "plots",
                                          "checkpoint_dir"};
  return {
      {"ingest", "validate a price CSV and write returns and volatilities", concat({common, data}), cmd_ingest},
      {"synth", "generate a regime-switching synthetic price panel",
       concat({common, {"synth_scenario", "synth_assets", "synth_steps", "synth_start"}}), cmd_synth},
      {"allocate", "solve one traditional allocation over the price history",
       concat({common, {"prices"}, solver, {"method", "r_min", "sigma_max", "window"}}), cmd_allocate},
      {"train", "train the DRL policy on every walk-forward window",
       concat({common, data, arch, train, schedule, {"cost_rate"}}), cmd_train},
      {"backtest", "walk-forward backtest of one model",
       concat({common, data, arch, train, solver, schedule, backtest, {"model"}}), cmd_backtest},
      {"compare", "walk-forward comparison of several models",
       concat({common, data, arch, train, solver, schedule, backtest, {"models"}}), cmd_compare},
      {"plot", "render SVG charts from equity and weights CSVs", concat({common, {"equity", "weights"}}), cmd_plot},
  };
}

std::string dashed(std::string key) {
  for (auto& c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

std::string help_of(const std::string& key) {
  for (const auto& k : known_keys()) {
    if (k.key == key) return k.default_value.empty() ? k.help : fmt::format("{} (default {})", k.help, k.default_value);
  }
  return {};
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"deepalloc: traditional and deep-RL portfolio allocation with walk-forward backtests"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DEEPALLOC_VERSION);

  const auto cmds = commands();
  struct Bound {
    CLI::App* sub = nullptr;
    std::string config_path;
    std::map<std::string, std::string> flags;
    std::map<std::string, CLI::Option*> options;
  };
  std::vector<Bound> bound(cmds.size());
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    auto& b = bound[i];
    b.sub = app.add_subcommand(cmds[i].name, cmds[i].help);
    b.sub->add_option("--config", b.config_path, "key = value config file (flags override it)");
    for (const auto& key : cmds[i].keys) {
      b.options[key] = b.sub->add_option("--" + dashed(key), b.flags[key], help_of(key));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      auto& b = bound[i];
      if (!b.sub->parsed()) continue;
      RunConfig cfg = b.config_path.empty() ? RunConfig() : RunConfig::load(b.config_path);
      for (const auto& [key, opt] : b.options) {
        if (opt->count() > 0) cfg.set(key, b.flags[key]);
      }
      cmds[i].fn(cfg);
    }
    return kExitOk;
  } catch (const UsageError& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kExitData;
  } catch (const NumericError& e) {
    fmt::print(stderr, "numeric failure: {}\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitNumeric;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  std::vector<std::string> storage = args;
  for (auto& s : storage) argv.push_back(s.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace deepalloc::cli

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "deepalloc/backtest.hpp"

namespace deepalloc::cli {

struct KeySpec {
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every recognized configuration key, in manifest order.
const std::vector<KeySpec>& known_keys();

/// Flat key = value configuration. Lines starting with '#' are comments.
/// Flags on the command line override file values.
class RunConfig {
 public:
  RunConfig();

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  const std::string& get(const std::string& key) const;
  bool is_set(const std::string& key) const { return !get(key).empty(); }

  double get_double(const std::string& key) const;
  long get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;

  LagSet lags() const;
  LagSet context_lags() const;
  NetworkArch arch() const;
  TrainConfig train() const;
  SolverConfig solver() const;
  TraditionalOptions traditional() const;
  DrlOptions drl() const;
  TestSpan test_span() const;
  Date initial_train_end() const;
  BacktestConfig backtest() const;

  /// Every key except `output`, one per line, in manifest order.
  std::string format() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Config echo plus command name and version; loadable with --config.
std::string format_manifest(std::string_view command, const RunConfig& config);

}  // namespace deepalloc::cli

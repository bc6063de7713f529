#pragma once

#include <string>
#include <vector>

#include "deepalloc/cli/config.hpp"

namespace deepalloc::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumeric = 3,
};

void cmd_ingest(const RunConfig& cfg);
void cmd_synth(const RunConfig& cfg);
void cmd_allocate(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_backtest(const RunConfig& cfg);
void cmd_compare(const RunConfig& cfg);
void cmd_plot(const RunConfig& cfg);

/// Parses arguments, runs one subcommand and maps failures to exit codes.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace deepalloc::cli

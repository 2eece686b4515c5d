#pragma once

#include <string>
#include <vector>

#include "ftle/cli/config.hpp"

namespace ftle::cli {

struct CommandResult {
  std::vector<std::string> outputs;
  Json summary;
};

const std::vector<std::string>& subcommand_names();

/// Runs one subcommand against a resolved config; writes artifacts under `out`.
CommandResult run_command(const std::string& name, const ExperimentConfig& cfg);

/// Entry point behind the `ftle` executable. Returns the process exit code:
/// 0 success, 2 configuration error, 3 numerical failure.
int run(int argc, const char* const* argv);

}  // namespace ftle::cli

#pragma once

// Experiment orchestration behind the `vaislab` command-line tool.
//
// Exit codes: 0 all configured tolerances pass, 1 some tolerance fails,
// 2 configuration error, 3 numerical precondition failure (check named).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vaislab/config.hpp"

namespace vaislab {

enum ExitCode : int { kExitPass = 0, kExitFail = 1, kExitConfig = 2, kExitNumerical = 3 };

struct RunOptions {
  std::optional<std::string> out_dir;  // overrides output.dir
  int jobs = 1;
  std::optional<std::uint64_t> seed;   // overrides seed
};

struct RunResult {
  int exit_code = kExitPass;
  std::string message;                 // failing check or error text
  std::vector<std::string> artifacts;  // files written
};

const std::vector<std::string>& runner_commands();

/// Runs one command; never throws for configuration or numerical errors.
RunResult run_command(const std::string& command, ExperimentConfig config, const RunOptions& options,
                      std::ostream& log);
/// Loads the config file first (a missing or malformed file is exit 2).
RunResult run_command_file(const std::string& command, const std::string& config_path, const RunOptions& options,
                           std::ostream& log);

}  // namespace vaislab

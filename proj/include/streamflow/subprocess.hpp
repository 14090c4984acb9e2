#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace streamflow {

struct CommandResult {
  int exit_code = -1;       // 128+signal when killed by a signal
  std::string output;       // captured stdout, verbatim bytes
  bool timed_out = false;
};

// Runs `command` through `/bin/sh -c` with the given working directory and
// exactly the given environment (no inheritance). stdout is captured;
// stderr passes through. On timeout the process group is killed and
// exit_code is 124.
CommandResult run_command(const std::string& command,
                          const std::filesystem::path& cwd,
                          const std::map<std::string, std::string>& env,
                          std::optional<double> timeout_sec = std::nullopt);

}  // namespace streamflow

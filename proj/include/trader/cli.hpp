#pragma once

#include <string>
#include <vector>

namespace trader::cli {

/// Exit codes shared by every command.
enum ExitCode : int { kSuccess = 0, kUsage = 2, kNumerical = 3 };

// Each command takes its arguments without the program or command name.
int cmd_simulate(const std::vector<std::string>& args);
int cmd_fit(const std::vector<std::string>& args);
int cmd_bench(const std::vector<std::string>& args);
int cmd_report(const std::vector<std::string>& args);

/// Dispatches `trader <command> ...`.
int run(int argc, const char* const* argv);

}  // namespace trader::cli

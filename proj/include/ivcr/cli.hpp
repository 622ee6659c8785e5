#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ivcr {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitValidation = 2,
  kExitSingular = 3,
  kExitEmptySubgroup = 4,
};

/// Runs `ivcr <subcommand> ...`; args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ivcr

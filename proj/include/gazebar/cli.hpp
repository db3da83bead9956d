#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gazebar {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // verification failed, or training diverged
  kExitUsage = 2,
  kExitFormat = 3,
};

/// Runs one subcommand. `args` excludes the program name. Machine-readable
/// results go to `out`, human-readable summaries and errors to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gazebar

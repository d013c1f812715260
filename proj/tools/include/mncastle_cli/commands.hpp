#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mncastle::cli {

enum ExitCode : int {
  kOk = 0,
  kBadFlags = 2,
  kIoFailure = 3,
  kBadLength = 4,
  kBadPrices = 5,
  kInferenceFailed = 6,
};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "MNCASTLE_OUT_DIR";

/// Runs the command line `args` (without the program name) and returns the
/// process exit code. Normal output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mncastle::cli

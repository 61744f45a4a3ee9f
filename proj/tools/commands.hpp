#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gazeadapt::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitNumeric = 4,
};

inline constexpr int kArtifactFormatVersion = 1;

/// Runs one command line (without the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gazeadapt::cli

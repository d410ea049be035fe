#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lddr::cli {

enum ExitCode : int {
  kOk = 0,
  kPartialFailure = 1,
  kConfigError = 2,
  kDataError = 3,
  kNumericalError = 4,
};

/// Runs one command line (without the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lddr::cli

#pragma once

#include <string>
#include <vector>

namespace pqi::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Runs the command line (args[0] is the program name) and returns the exit code.
/// Errors are reported on stderr.
int run(const std::vector<std::string>& args);

}  // namespace pqi::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace eil::cli {

enum ExitCode : int { ok = 0, usage = 1, data = 2, numerical = 3 };

/// Runs the command line `args` (without the program name). Normal output
/// goes to `out`, diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eil::cli

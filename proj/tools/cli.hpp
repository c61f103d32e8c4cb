#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rydmap::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kError = 1;
inline constexpr int kValidationFailure = 2;

/// Runs one command line (args[0] is the program name). Output that is not
/// written to a file goes to `out`; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rydmap::cli

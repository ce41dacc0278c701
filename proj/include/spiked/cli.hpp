#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spiked::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,       // bad flags or parameter values
  kIo = 3,          // unreadable input or unwritable output
  kMalformed = 4,   // input file does not parse
  kAsymmetric = 5,  // input matrix is not symmetric
  kNumerical = 6,   // non-convergence, blow-up, or projection failure
};

/// Entry point shared by the executable and the tests. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spiked::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ioest/types.hpp"

namespace ioest::cli {

/// Exit codes of the command-line tool.
enum Exit : int {
  kOk = 0,
  kUsage = 2,         ///< parse errors, grid mismatch
  kPrecondition = 3,  ///< not regular, unstable, not minimal, ...
  kVerification = 4,
  kRankCG = 5,
};

int exit_code_for(ErrorCode code);

/// Runs `ioest <args...>` (args excludes the program name). On failure the
/// first line written to `err` is
///
///   error=<ErrorCode> exit=<code> reason=<one-line message>
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ioest::cli

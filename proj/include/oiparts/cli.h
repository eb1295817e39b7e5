#pragma once

#include <iosfwd>

namespace oiparts {

inline constexpr const char* kToolVersion = "1.0.0";

// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitNotConverged = 3,
};

// Entry point for `oiparts <select|segment|refine|eval|synth> ...`.
int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);

}  // namespace oiparts

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "polarguide/error.hpp"

namespace polarguide::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitNumeric = 1,
  kExitIo = 2,
  kExitConfig = 3,
  kExitBridge = 4,
};

int exit_code_for(ErrorKind kind);

// Runs one command; args excludes the program name. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace polarguide::cli

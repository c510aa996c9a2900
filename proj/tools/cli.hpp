#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace selfens::cli {

enum ExitCode : int {
  kOk = 0,
  kUsageError = 1,
  kDataError = 2,
  kVerificationFailed = 3,
};

/// Entry point of the `selfens` tool. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace selfens::cli

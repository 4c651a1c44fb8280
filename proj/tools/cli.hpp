#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace capa::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kNotConverged = 2,
  kPartialFailure = 3,
};

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace capa::cli

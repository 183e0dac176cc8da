#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace syndecomp {

enum ExitCode : int {
  exit_ok = 0,
  exit_usage = 2,
  exit_rejected = 3,
  exit_numeric = 4,
};

/// Entry point behind the `syndecomp` executable. `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace syndecomp

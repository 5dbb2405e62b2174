#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hwdetect/error.hpp"

namespace hwdetect::cli {

/// 0 success, 2 user or input error, 3 backend or transport error,
/// 4 internal invariant breach.
int exit_code_for(ErrorCode code);

/// Runs one invocation. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace hwdetect::cli

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace frsf::cli {

/// Exit codes: 0 success, 2 usage or data error, 1 internal failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload: args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace frsf::cli

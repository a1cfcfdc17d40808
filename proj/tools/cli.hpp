#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hubfield::cli {

/// Runs one CLI invocation. args[0] is the program name.
/// Exit codes: 0 success, 1 domain error, 2 usage or input error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hubfield::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sectrc::cli {

// Dispatches one command-line invocation. Returns the process exit code:
// 0 success, 1 usage error, 2 validation failure, 3 runtime failure.
// Failures print one line to `err` prefixed error:usage:, error:validation:
// or error:runtime:.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sectrc::cli

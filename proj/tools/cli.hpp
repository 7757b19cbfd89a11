#pragma once

#include <ostream>

namespace rnav::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error. Failures print a
/// one-line JSON record {"error", "message", "exit"} to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rnav::cli

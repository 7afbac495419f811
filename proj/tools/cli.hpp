#pragma once

#include <iosfwd>

namespace astgin::cli {

// Runs one command line. Returns the process exit code: 0 success,
// 1 validation failure, 2 I/O failure, 3 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace astgin::cli

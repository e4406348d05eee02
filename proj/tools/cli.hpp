#pragma once

#include <iosfwd>

namespace arclite {

// Full command-line entry point. Writes to the given streams so tests can
// capture output. Returns the process exit code: 0 success, 1 runtime
// failure, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace arclite

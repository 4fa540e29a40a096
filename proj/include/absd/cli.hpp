#pragma once

namespace absd {

// Full command-line entry point, factored out of main() so tests can drive
// it in process.  Returns the process exit code: 0 success, 1 internal
// error, 2 config or input error, 3 solver non-convergence or non-finite
// abort, 4 failed material check, 5 degenerate analysis quantity.
int run_cli(int argc, const char* const* argv);

}  // namespace absd

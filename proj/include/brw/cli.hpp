#pragma once

#include <iosfwd>

namespace brw {

/// Exit codes of the command line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitTolerance = 1,  // a declared tolerance or verdict failed
  kExitUsage = 2,      // bad flags, invalid input, missing file
  kExitBudget = 3,     // enumeration or population budget exceeded
};

/// Parses argv (argv[0] is the program name) and runs one subcommand:
/// check, simulate, walk renewal, walk estimates, spine, oracle, experiment.
/// CSV goes to `out` (or --out), diagnostics and usage text to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace brw

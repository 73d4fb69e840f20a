#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace seaclear {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,  // gradcheck found an operation over tolerance
  kExitUsage = 2,        // bad arguments or parameter values
  kExitDomain = 3,       // domain, shape or singular-transform errors
  kExitIo = 4,           // unreadable, unwritable or malformed files
};

/// Runs one command (synth, dehaze, warp, gradcheck, train-deblur,
/// stn-demo). `args` excludes the program name. Diagnostics go to `err`,
/// everything else to `out`; the return value is an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seaclear

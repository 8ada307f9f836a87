#pragma once

#include <iosfwd>

namespace geomopt {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitFailed = 1, kExitUsage = 2 };

/// Entry point of the `geomopt` tool: subcommands phantom, simulate,
/// optimize, bench and gradcheck.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace geomopt

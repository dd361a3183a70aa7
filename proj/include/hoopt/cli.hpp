#pragma once

#include <iosfwd>

namespace hoopt {

// Exit statuses of the command-line front end.
enum ExitCode : int { exit_ok = 0, exit_input_error = 1, exit_not_converged = 2 };

// Subcommands: adapt, quality, implicitize, check-derivatives,
// compare-analytic, generate-fixtures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hoopt

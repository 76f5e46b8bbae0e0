#pragma once

#include <iosfwd>

namespace latcap {

// Exit codes of the latcap command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitCheckFailed = 3;

// Runs "latcap fit | simulate | check" with the given arguments, argv[0]
// being the program name. Reports go to out (or --out), messages to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace latcap

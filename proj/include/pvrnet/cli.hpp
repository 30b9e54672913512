#pragma once

#include <iosfwd>

namespace pvr {

// Exit codes of the pvrf command line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitVerifyFailed = 3;

/// Parses arguments and runs one subcommand; never throws.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace pvr

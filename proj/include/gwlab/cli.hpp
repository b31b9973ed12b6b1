// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

namespace gwlab {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitInternal = 3,
};

std::string_view version();

/// Shortest decimal string that parses back to exactly x ("inf", "-inf",
/// "nan" for non-finite values).
std::string format_double(double x);

/// Entry point of the gwlab command line. Output files go to --out; the
/// human-readable summary goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gwlab

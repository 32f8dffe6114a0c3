#pragma once

// Command-line front end. Exit codes: 0 success, 2 usage, 3 data error,
// 4 solver failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace hbes {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitSolver = 4 };

/// Runs one command. `args` excludes the program name. The run manifest and
/// human-readable summaries go to `out`, errors and warnings to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hbes

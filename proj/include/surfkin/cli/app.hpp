#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace surfkin::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitMissing = 3;
inline constexpr int kExitAudit = 4;

// Environment variable naming the default output root.
inline constexpr const char* kOutEnv = "SURFKIN_OUT";

// Runs the command line `args` (without the program name). Reports go to
// `out`, diagnostics to `err`; returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace surfkin::cli

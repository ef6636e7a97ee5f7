#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace patree::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kSolverFailure = 2;
inline constexpr int kViolation = 3;

/// Seed used when --seed is omitted.
inline constexpr unsigned long long kDefaultSeed = 20240607;

/// Runs one subcommand. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace patree::cli

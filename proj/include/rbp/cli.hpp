#pragma once

#include <iosfwd>

namespace rbp::cli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitCriterionFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point behind the rbp executable. Output goes to `out`, diagnostics
/// to `err`; the return value is the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rbp::cli

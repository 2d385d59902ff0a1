#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace commtype::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitUsage = 2;

/// Runs the tool on `args` (without the program name). Human-readable
/// diagnostics go to `err`; summaries and `--report` lines go to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace commtype::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scoresync::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInternal = 3;

/// Runs one invocation; `args` excludes the program name. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Argument vector for one manifest line: either {"argv": [...]} or
/// {"command": name, "args": {flag: value, ...}}. Booleans become bare
/// flags (false omits them), arrays repeat the flag.
std::vector<std::string> manifest_job_argv(const std::string& line);

}  // namespace scoresync::cli

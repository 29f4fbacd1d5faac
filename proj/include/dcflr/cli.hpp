#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dcflr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitInvalidConfig = 2;
inline constexpr int kExitCheckFailed = 3;

/// Runs the command line tool in process. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace dcflr

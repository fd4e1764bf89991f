#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace segtrm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // bad flags or config
inline constexpr int kExitRuntime = 2;  // I/O, data or numerical failure

// Runs one subcommand; args exclude the program name.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace segtrm

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace refocus::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntimeError = 1;
inline constexpr int kExitUsage = 2;

// Parses argv and runs one subcommand. Output goes to out/err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace refocus::cli

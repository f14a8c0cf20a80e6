#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace odgen::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInvalid = 2;
inline constexpr int kFailure = 3;

// Runs one command line (args[0] is the program name) and returns its exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace odgen::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sscgan {

inline constexpr const char* kToolName = "sscgan";
inline constexpr const char* kToolVersion = "0.1.0";

// Runs one command line (args[0] is the program name). Returns 0 on
// success, 1 on a usage error and 2 on a runtime failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace sscgan

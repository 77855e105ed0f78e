#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rswitch::cli {

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "RSWITCH_OUT_DIR";

/// Runs one command line (arguments after the program name). Returns 0 on success,
/// 1 on a numerical failure or a failed check, 2 on a usage or input error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace rswitch::cli

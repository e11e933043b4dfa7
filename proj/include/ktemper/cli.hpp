#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ktemper::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  ///< unexpected internal error
inline constexpr int kExitConfig = 2;   ///< bad flags or configuration
inline constexpr int kExitParse = 3;    ///< unreadable or malformed model file
inline constexpr int kExitNumeric = 4;  ///< numeric abort, or a diagnose threshold failed
inline constexpr int kExitCap = 5;      ///< enumeration or kernel cap exceeded
inline constexpr int kExitData = 6;     ///< dataset, trace or reproduction problem

/// Environment variable holding the default worker count.
inline constexpr const char* kThreadsEnv = "KTEMPER_THREADS";

inline constexpr const char* kVersion = "1.0.0";

/// Runs the command line; argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, with the arguments after the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ktemper::cli

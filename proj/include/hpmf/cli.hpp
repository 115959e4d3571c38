#pragma once

#include <span>
#include <string>
#include <string_view>

namespace hpmf::cli {

inline constexpr std::string_view kVersion = "1.0.0";

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kDataError = 2;
inline constexpr int kNumericError = 3;

/// Runs the command line `args` (args[0] is the program name) and returns the
/// exit code. Errors are reported on stderr.
int run(std::span<const std::string> args);
int main(int argc, char** argv);

}  // namespace hpmf::cli

// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace clipada::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerificationFailed = 1;
inline constexpr int kExitUsage = 2;

// Environment variable naming the default output directory.
inline constexpr const char* kOutputEnv = "CLIPADA_OUT";

// Entry point of the `clipada` tool. args[0] is the program name.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clipada::cli

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "remreg/config.hpp"

namespace remreg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Subcommand names in help order.
std::vector<std::string> cli_subcommands();
/// Accepted configuration keys of a subcommand (ConfigError if unknown).
std::vector<KeySpec> cli_keys(const std::string& subcommand);

/// Runs `args` (subcommand first, no program name). Results go to `out`,
/// logs and diagnostics to `err`. Returns kExitOk, kExitFailure or kExitUsage.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace remreg

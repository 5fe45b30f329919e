#pragma once

#include <functional>
#include <stdexcept>

#include <CLI11.hpp>

namespace nclasso::cli {

enum ExitCode : int { kOk = 0, kVerificationFailed = 1, kUsage = 2 };

/// Bad flag combination or unreadable input; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adds all subcommands to app. The returned callable runs whichever
/// subcommand was parsed and yields its exit code.
std::function<int()> register_commands(CLI::App& app);

}  // namespace nclasso::cli

#pragma once

#include <string>
#include <vector>

#include "firp/cli/config.hpp"

namespace firp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

const std::vector<std::string>& subcommands();

struct Invocation {
  std::string subcommand;
  RunConfig config;
  std::string out_dir = ".";
  int jobs = 1;
};

/// Runs one subcommand. Library errors propagate.
void dispatch(const Invocation& inv);

/// Full command line: parse, resolve the config, dispatch. Returns the exit
/// status and prints a one-line diagnostic on failure.
int run_cli(int argc, char** argv);

}  // namespace firp::cli

#pragma once

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

#include "pgpt/config.hpp"

namespace pgpt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct CliContext {
  config::EnvLookup env = config::process_env();
  // Long-running subcommands return once this becomes true.
  const std::atomic<bool>* stop = nullptr;
  // Source of text-only pipeline input; std::cin when null.
  std::istream* in = nullptr;
};

// `args` excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const CliContext& ctx = {});

}  // namespace pgpt::cli

#include <csignal>
#include <cstring>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "pgpt/cli.hpp"

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

void install_handlers() {
  struct sigaction sa;
  std::memset(&sa, 0, sizeof(sa));
  sa.sa_handler = on_signal;
  sigemptyset(&sa.sa_mask);
  sa.sa_flags = 0;  // no SA_RESTART: a blocked stdin read returns so text-only input ends
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
}

}  // namespace

int main(int argc, char** argv) {
  install_handlers();
  spdlog::set_default_logger(spdlog::stderr_color_mt("pgpt"));
  pgpt::cli::CliContext ctx;
  ctx.stop = &g_stop;
  return pgpt::cli::run_cli({argv + 1, argv + argc}, std::cout, std::cerr, ctx);
}

// Command line front end: mfgfem solve|study-h|study-lambda|study-joint --config FILE

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "mfgfem/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Finite element solver for stationary mean field games with nondifferentiable Hamiltonians"};
  app.require_subcommand(1, 1);

  std::string config;
  std::string out = ".";
  bool fallback = false;
  int threads = 1;
  std::string log_level = "warn";

  for (const char* name : {"solve", "study-h", "study-lambda", "study-joint"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "Configuration file (key = value)")->required();
    sub->add_option("--out", out, "Output directory")->capture_default_str();
    sub->add_flag("--fallback", fallback, "Regularize automatically when policy iteration fails");
    sub->add_option("--threads", threads, "Solve independent levels concurrently")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--log-level", log_level, "trace, debug, info, warn, error, off")
        ->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  mfgfem::RunOptions options;
  options.fallback = fallback;
  options.threads = threads;
  return mfgfem::run_command(app.get_subcommands().front()->get_name(), config, out, options);
}

// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Usage: acceptance [--seed U64] [--trials INT] [--mc INT] [id ...]
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bitlab/verify.hpp"

int main(int argc, char** argv) {
  CLI::App app{"bitlab acceptance suite"};
  bitlab::VerifyOptions options;
  std::uint64_t trials = 0;
  std::uint64_t mc = 0;
  std::vector<std::string> ids;
  app.add_option("--seed", options.seed, "master seed");
  app.add_option("--trials", trials, "override trials per cell");
  app.add_option("--mc", mc, "override Monte Carlo samples");
  app.add_option("ids", ids, "criteria to run (default: all)");
  CLI11_PARSE(app, argc, argv);
  if (trials) options.trials = trials;
  if (mc) options.mc_samples = mc;
  if (ids.empty()) ids = bitlab::criterion_ids();

  int failed = 0;
  for (const auto& id : ids) {
    const auto result = bitlab::run_criterion(id, options);
    std::cout << bitlab::format_result(result) << std::endl;
    failed += result.passed ? 0 : 1;
  }
  std::cout << (ids.size() - failed) << "/" << ids.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}

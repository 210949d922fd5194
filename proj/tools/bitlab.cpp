// bitlab: run simulation scenarios, verify acceptance criteria, query coverage and VC.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bitlab/descriptors.hpp"
#include "bitlab/experiments.hpp"
#include "bitlab/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::string scenario;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir = ".";
  std::uint64_t trials = 0;
  std::uint64_t mc = 0;
};

bitlab::ExperimentConfig make_config(const Common& c) {
  bitlab::ExperimentConfig config;
  if (!c.config_path.empty()) {
    config = bitlab::ExperimentConfig::load(c.config_path);
  } else if (!c.scenario.empty()) {
    config = bitlab::default_config(c.scenario);
  } else {
    throw bitlab::ArgumentError("either --config or --scenario is required");
  }
  if (c.seed_set) config.master_seed = c.seed;
  if (c.trials) config.trials = c.trials;
  if (c.mc) config.mc_samples = c.mc;
  config.validate();
  return config;
}

void write_outputs(const bitlab::SweepResult& result, const bitlab::ExperimentConfig& config,
                   const std::string& out_dir, const std::string& stem) {
  fs::create_directories(out_dir);
  const fs::path csv = fs::path(out_dir) / (stem + ".csv");
  const fs::path summary = fs::path(out_dir) / (stem + "_summary.json");
  bitlab::write_csv(result.rows, csv);
  bitlab::write_summary_json(result, config, summary);
  std::size_t passed = 0;
  std::size_t judged = 0;
  for (const auto& cell : result.cells) {
    if (!cell.pass) continue;
    ++judged;
    passed += *cell.pass ? 1 : 0;
  }
  std::cout << result.rows.size() << " rows -> " << csv.string() << "\n"
            << "summary -> " << summary.string() << " (" << passed << "/" << judged << " cells pass)\n";
  for (const auto& flag : result.flags) std::cout << "flag: " << flag << "\n";
}

json parse_json_arg(const std::string& text) {
  if (!text.empty() && text.front() != '{' && fs::exists(text)) {
    std::ifstream in(text);
    return json::parse(in);
  }
  return json::parse(text);
}

bitlab::RewardFn make_reward(const std::string& kind, const bitlab::FunctionClass& F, const std::string& target) {
  const auto index = F.find(target);
  if (!index) throw bitlab::ArgumentError("unknown target \"" + target + "\"");
  switch (bitlab::parse_reward_kind(kind)) {
    case bitlab::RewardKind::end_token:
      return bitlab::end_token_reward(F.member(*index), F.horizon());
    case bitlab::RewardKind::zero_one:
      return bitlab::zero_one_reward(F.member(*index), F.horizon());
    case bitlab::RewardKind::custom:
      break;
  }
  throw bitlab::ArgumentError("custom rewards cannot be built from the command line");
}

bitlab::PromptDistribution prompts_for(const bitlab::BuiltClass& built) {
  if (!built.prompts.empty()) return bitlab::PromptDistribution::uniform(built.prompts);
  return bitlab::PromptDistribution::uniform_cube(built.prompt_length);
}

// One cell of a named scenario, or a cell described by class and policy descriptors.
struct SimulateArgs {
  std::uint64_t n = 0;
  std::uint64_t T = 0;
  std::uint64_t N = 0;
  std::uint64_t size = 0;
  std::string class_desc;
  std::string policy_desc;
  std::string target = "f0";
  std::string reward = "end_token";
  std::string method = "bon";
  std::string dataset;
};

int simulate(const Common& c, const SimulateArgs& a) {
  if (a.class_desc.empty()) {
    bitlab::ExperimentConfig config = make_config(c);
    auto pick = [](std::vector<std::uint64_t>& grid, std::uint64_t v) {
      if (v) grid = {v};
      else if (!grid.empty()) grid.resize(1);
    };
    pick(config.n_grid, a.n);
    pick(config.T_grid, a.T);
    pick(config.N_grid, a.N);
    pick(config.size_grid, a.size);
    config.validate();
    write_outputs(bitlab::run_sweep(config), config, c.out_dir, config.scenario + "_cell");
    return 0;
  }

  const bitlab::BuiltClass built = bitlab::build_class(parse_json_arg(a.class_desc));
  const std::size_t T = built.functions.horizon();
  const auto P = prompts_for(built);
  const bitlab::RewardFn r = make_reward(a.reward, built.functions, a.target);
  const json policy_json = a.policy_desc.empty() ? json{{"kind", "uniform"}} : parse_json_arg(a.policy_desc);
  const auto policy = bitlab::build_policy(policy_json, T, &built.functions);
  const std::uint64_t n = a.n ? a.n : 64;
  const std::uint64_t trials = c.trials ? c.trials : 20;
  const std::uint64_t seed = c.seed_set ? c.seed : 0;
  if (a.method != "sft" && a.method != "bon") throw bitlab::ArgumentError("--method must be sft or bon");

  if (!a.dataset.empty()) {
    if (const fs::path parent = fs::path(a.dataset).parent_path(); !parent.empty()) fs::create_directories(parent);
    bitlab::Rng rng(bitlab::derive_stream_seed(seed, "simulate:dataset", 0, 0));
    if (a.method == "sft") {
      bitlab::write_jsonl(bitlab::collect_sft_data(P, policy, n, rng), a.dataset);
    } else {
      bitlab::write_jsonl(bitlab::collect_reward_data(P, policy, r, n, rng), a.dataset);
    }
    std::cout << "dataset -> " << a.dataset << "\n";
  }

  bitlab::ExperimentConfig config;
  config.scenario = "custom";
  config.master_seed = seed;
  config.trials = trials;
  config.mc_samples = c.mc ? c.mc : 100000;
  config.n_grid = {n};
  config.T_grid = {T};
  config.options = {{"class", parse_json_arg(a.class_desc)}, {"policy", policy_json}, {"target", a.target},
                    {"reward", a.reward}, {"method", a.method}};
  bitlab::SweepResult result;
  result.scenario = "custom";
  const bitlab::RewardClass R = bitlab::induce_reward_class(built.functions, r.kind());
  const bitlab::NRule rule = a.N ? bitlab::NRule::fixed(a.N)
                                 : bitlab::NRule::realizable(bitlab::coverage_constant(policy, r, P));
  for (std::uint64_t t = 0; t < trials; ++t) {
    const std::uint64_t s = bitlab::derive_stream_seed(seed, "custom", 0, t);
    bitlab::Rng rng(s);
    bitlab::TrialRecord rec =
        a.method == "sft"
            ? bitlab::run_sft_trial(built.functions, P, policy, r, n, rng)
            : bitlab::run_bon_trial(R, P, policy, r, n, rule, {bitlab::Evaluation::Mode::automatic, config.mc_samples},
                                    rng);
    rec.scenario = "custom";
    rec.trial = t;
    rec.seed = s;
    result.rows.push_back(std::move(rec));
  }
  result.cells = bitlab::summarize_cells(result.rows);
  write_outputs(result, config, c.out_dir, "custom_cell");
  return 0;
}

struct CoverageArgs {
  std::string class_desc;
  std::string policy_desc = R"({"kind":"uniform"})";
  std::string target = "f0";
  std::string reward = "end_token";
  std::string prompt;
};

int coverage(const Common& c, const CoverageArgs& a) {
  const bitlab::BuiltClass built = bitlab::build_class(parse_json_arg(a.class_desc));
  const std::size_t T = built.functions.horizon();
  const bitlab::RewardFn r = make_reward(a.reward, built.functions, a.target);
  const auto policy = bitlab::build_policy(parse_json_arg(a.policy_desc), T, &built.functions);
  json out{{"policy", policy.describe()}, {"reward", r.name()}};
  if (!a.prompt.empty()) {
    const auto x = bitlab::BitString::parse(a.prompt);
    out["prompt"] = a.prompt;
    out["exact"] = bitlab::coverage_exact(policy, r, x);
    if (c.mc) {
      bitlab::Rng rng(bitlab::derive_stream_seed(c.seed, "coverage", 0, 0));
      const auto e = bitlab::coverage_mc(policy, r, x, c.mc, rng);
      out["mc"] = {{"mean", e.value}, {"se", e.se}, {"samples", c.mc}};
    }
  } else {
    out["alpha"] = bitlab::coverage_constant(policy, r, prompts_for(built));
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct VcArgs {
  std::string class_desc;
  std::string panel = "end_token";
  std::string certificate;
  std::size_t cap = 62;
};

int vc(const VcArgs& a) {
  const bitlab::BuiltClass built = bitlab::build_class(parse_json_arg(a.class_desc));
  const std::size_t T = built.functions.horizon();
  const std::size_t L = built.prompt_length;
  auto behaviors = [&]() -> bitlab::BinaryBehaviorClass {
    if (a.panel == "functions") {
      return bitlab::function_behaviors(built.functions, bitlab::strings_of_lengths(L, L + T - 1));
    }
    const auto kind = bitlab::parse_reward_kind(a.panel);
    return bitlab::reward_behaviors(bitlab::induce_reward_class(built.functions, kind),
                                    bitlab::prompt_response_panel(L, T));
  }();
  const bitlab::VcResult result = bitlab::vc_search(behaviors, a.cap);
  json witness = json::array();
  for (auto p : result.witness) witness.push_back(behaviors.points()[p]);
  json out{{"panel", a.panel},
           {"points", behaviors.point_count()},
           {"functions", behaviors.function_count()},
           {"dimension", result.dimension},
           {"witness", witness}};
  if (!a.certificate.empty()) {
    std::ofstream file(a.certificate);
    if (!file) throw bitlab::IoError("cannot open " + a.certificate + " for writing");
    file << bitlab::shatter_certificate(behaviors, result.witness).to_json() << "\n";
    out["certificate"] = a.certificate;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bitlab: best-of-N and SFT simulations on bit strings"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "experiment config JSON");
    sub->add_option("--scenario", common.scenario, "scenario name or alias (t4 ... c2)");
    sub->add_option("--seed", common.seed, "master seed")->each([&](const std::string&) { common.seed_set = true; });
    sub->add_option("--out", common.out_dir, "output directory");
    sub->add_option("--trials", common.trials, "trials per cell");
    sub->add_option("--mc", common.mc, "Monte Carlo samples");
  };

  auto* sweep = app.add_subcommand("sweep", "run every cell of a scenario");
  add_common(sweep);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "run a single cell");
  add_common(simulate_cmd);
  simulate_cmd->add_option("--n", sim.n, "sample size");
  simulate_cmd->add_option("--T", sim.T, "response length");
  simulate_cmd->add_option("--N", sim.N, "best-of-N draws");
  simulate_cmd->add_option("--size", sim.size, "m or D");
  simulate_cmd->add_option("--class", sim.class_desc, "class descriptor (JSON text or file)");
  simulate_cmd->add_option("--policy", sim.policy_desc, "policy descriptor (JSON text or file)");
  simulate_cmd->add_option("--target", sim.target, "target member name");
  simulate_cmd->add_option("--reward", sim.reward, "end_token or zero_one");
  simulate_cmd->add_option("--method", sim.method, "sft or bon")->check(CLI::IsMember({"sft", "bon"}));
  simulate_cmd->add_option("--dataset", sim.dataset, "also write one dataset as JSON lines");

  std::string theorem;
  auto* verify = app.add_subcommand("verify-theorem", "run one acceptance criterion");
  add_common(verify);
  verify->add_option("id", theorem, "criterion id")->required()->check(CLI::IsMember(bitlab::short_ids()));

  CoverageArgs cov;
  auto* coverage_cmd = app.add_subcommand("coverage", "coverage of a policy under a reward");
  add_common(coverage_cmd);
  coverage_cmd->add_option("--class", cov.class_desc, "class descriptor")->required();
  coverage_cmd->add_option("--policy", cov.policy_desc, "policy descriptor");
  coverage_cmd->add_option("--target", cov.target, "target member name");
  coverage_cmd->add_option("--reward", cov.reward, "end_token or zero_one");
  coverage_cmd->add_option("--prompt", cov.prompt, "single prompt; default is the coverage constant");

  VcArgs vca;
  auto* vc_cmd = app.add_subcommand("vc", "brute-force VC dimension on an exhaustive panel");
  vc_cmd->add_option("--class", vca.class_desc, "class descriptor")->required();
  vc_cmd->add_option("--panel", vca.panel, "functions, end_token or zero_one")
      ->check(CLI::IsMember({"functions", "end_token", "zero_one"}));
  vc_cmd->add_option("--certificate", vca.certificate, "write the shattering certificate here");
  vc_cmd->add_option("--cap", vca.cap, "largest set size searched");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep->parsed()) {
      const auto config = make_config(common);
      write_outputs(bitlab::run_sweep(config), config, common.out_dir, config.scenario);
      return 0;
    }
    if (simulate_cmd->parsed()) return simulate(common, sim);
    if (verify->parsed()) {
      bitlab::VerifyOptions options;
      if (common.seed_set) options.seed = common.seed;
      if (common.trials) options.trials = common.trials;
      if (common.mc) options.mc_samples = common.mc;
      int failed = 0;
      for (const auto& id : bitlab::criterion_ids()) {
        if (id != theorem) continue;
        const auto result = bitlab::run_criterion(id, options);
        std::cout << bitlab::format_result(result) << "\n";
        failed += result.passed ? 0 : 1;
      }
      return failed ? 1 : 0;
    }
    if (coverage_cmd->parsed()) return coverage(common, cov);
    if (vc_cmd->parsed()) return vc(vca);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

#include <gtest/gtest.h>

#include <algorithm>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bitlab/descriptors.hpp"
#include "bitlab/experiments.hpp"
#include "generators.hpp"

using namespace bitlab;
using nlohmann::json;

namespace {

BitString S(const char* text) { return BitString::parse(text); }

std::string csv_text(const SweepResult& r) {
  std::string out = csv_header() + "\n";
  for (const auto& row : r.rows) out += csv_row(row) + "\n";
  return out;
}

}  // namespace

TEST(ExpectedReward, ExactValues) {
  const FunctionClass shift = make_shift_class(4, 3);
  const auto cube = PromptDistribution::uniform_cube(13);
  const RewardFn r = end_token_reward(shift.member(0), 3);
  EXPECT_EQ(expected_reward_exact(shift.member(0), cube, r), 1.0);
  for (std::uint64_t d = 1; d < shift.size(); ++d) EXPECT_EQ(expected_reward_exact(shift.member(d), cube, r), 0.5);

  const FunctionClass pair = make_counting_pair(4);
  const auto point = PromptDistribution::point(S("01"));
  const RewardFn r0 = end_token_reward(constant_predictor(0), 4);
  EXPECT_EQ(expected_reward_exact(pair.member(0), point, r0), 0.0);
  EXPECT_EQ(expected_reward_exact(pair.member(1), point, r0), 1.0);
}

TEST(ExpectedReward, PolicyMonteCarlo) {
  Rng rng(1);
  const FunctionClass F = make_shift_class(16, 4);
  const auto P = PromptDistribution::uniform_cube(65);
  const RewardFn r = end_token_reward(F.member(0), 4);
  const Estimate det = estimate_reward_mc(ResponsePolicy::deterministic(F.member(0), 4), P, r, 1000, rng);
  EXPECT_EQ(det.value, 1.0);
  EXPECT_EQ(det.se, 0.0);
  const BonPolicy oracle(r, ResponsePolicy::uniform(4), 2);
  const Estimate two = estimate_reward_mc(oracle, P, r, 100000, rng);
  EXPECT_LE(std::abs(two.value - 0.75), 4.0 * two.se);
  EXPECT_DOUBLE_EQ(expected_reward_exact(oracle, P, r), 0.75);
  const Estimate one = estimate_reward_mc(BonPolicy(r, ResponsePolicy::uniform(4), 1), P, r, 100000, rng);
  EXPECT_LE(std::abs(one.value - 0.5), 4.0 * one.se);
  EXPECT_THROW(estimate_reward_mc(oracle, P, r, 0, rng), ArgumentError);
}

TEST(Trials, Sft) {
  Rng rng(2);
  const FunctionClass F = make_shift_class(8, 4);
  const auto P = PromptDistribution::uniform_cube(33);
  const RewardFn r = end_token_reward(F.member(0), 4);
  EXPECT_EQ(run_sft_trial(F, P, ResponsePolicy::deterministic(F.member(0), 4), r, 40, rng).reward_mean, 1.0);
  for (int i = 0; i < 20; ++i) {
    const double v = run_sft_trial(F, P, ResponsePolicy::uniform_fixed_last(0, 4), r, 1, rng).reward_mean;
    EXPECT_TRUE(v == 0.5 || v == 1.0) << v;
  }
  const FunctionClass pair = make_counting_pair(3);
  const TrialRecord t6 = run_sft_trial(pair, PromptDistribution::point(S("01")),
                                       ResponsePolicy::deterministic(constant_predictor(0), 3),
                                       end_token_reward(constant_predictor(0), 3), 7, rng);
  EXPECT_EQ(t6.reward_mean, 0.0);
  EXPECT_EQ(t6.fitted_member, "f1");
}

TEST(Trials, Bon) {
  Rng rng(3);
  const FunctionClass F = make_shift_class(4, 2);
  const auto P = PromptDistribution::uniform_cube(9);
  const RewardFn r = end_token_reward(F.member(1), 2);
  const RewardClass R = induce_reward_class(F, RewardKind::end_token);
  const auto base = ResponsePolicy::uniform(2);
  EXPECT_THROW(run_bon_trial(R, P, base, r, 0, NRule::fixed(2), {}, rng), ArgumentError);
  const TrialRecord oracle = run_bon_trial(R, P, base, r, 1, NRule::fixed(3), {Evaluation::Mode::exact}, rng, true);
  EXPECT_DOUBLE_EQ(oracle.reward_mean, 0.875);
  EXPECT_EQ(oracle.method, "oracle-bon");
  const TrialRecord fitted = run_bon_trial(R, P, base, r, 200, NRule::realizable(0.5), {}, rng);
  EXPECT_EQ(fitted.N, std::optional<std::uint64_t>(choose_N_realizable(200, 0.5)));
  EXPECT_DOUBLE_EQ(fitted.reward_mean, 1.0 - std::pow(0.5, static_cast<double>(*fitted.N)));
}

TEST(Trials, SftBeatsBonOnceTheClassIsIdentified) {
  Rng rng(4);
  const FunctionClass F = make_shift_class(16, 4);
  const auto P = PromptDistribution::uniform_cube(65);
  const RewardFn r = end_token_reward(F.member(0), 4);
  const RewardClass R = induce_reward_class(F, RewardKind::end_token);
  double sft = 0.0;
  double bon = 0.0;
  for (int i = 0; i < 30; ++i) {
    sft += run_sft_trial(F, P, ResponsePolicy::deterministic(F.member(0), 4), r, 32, rng).reward_mean;
    bon += run_bon_trial(R, P, ResponsePolicy::uniform(4), r, 32, NRule::realizable(0.5), {}, rng).reward_mean;
  }
  EXPECT_GE(sft, bon);
}

TEST(NRuleTest, Choices) {
  EXPECT_EQ(NRule::fixed(5).choose(100), 5u);
  EXPECT_EQ(NRule::realizable(0.5).choose(16), 4u);
  EXPECT_EQ(NRule::agnostic(0.5, 0.125, 7, 0.1).choose(4096), 3u);
  EXPECT_THROW(NRule::fixed(0), ArgumentError);
}

TEST(Config, DefaultsAliasesAndValidation) {
  EXPECT_EQ(resolve_scenario("t7"), "realizable_sft_rate");
  EXPECT_EQ(resolve_scenario("c1"), resolve_scenario("p2"));
  EXPECT_THROW(resolve_scenario("t9"), ArgumentError);
  for (const auto& name : scenario_names()) EXPECT_NO_THROW(default_config(name).validate());
  EXPECT_EQ(default_config("p3").n_grid, std::vector<std::uint64_t>{1315});
  ExperimentConfig c = default_config("t6");
  c.trials = 0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = default_config("t6");
  c.n_grid = {};
  EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(Config, JsonRoundTripAndLoad) {
  ExperimentConfig c = default_config("t5");
  c.master_seed = 99;
  c.trials = 7;
  const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(config_digest(back), config_digest(c));
  c.master_seed = 100;
  EXPECT_NE(config_digest(back), config_digest(c));

  const auto path = std::filesystem::temp_directory_path() / "bitlab_config.json";
  {
    std::ofstream out(path);
    out << R"({"scenario":"t6","trials":3,"n_grid":[1,2]})";
  }
  const ExperimentConfig loaded = ExperimentConfig::load(path);
  EXPECT_EQ(loaded.scenario, "agnostic_sft_failure");
  EXPECT_EQ(loaded.trials, 3u);
  EXPECT_THROW(ExperimentConfig::load(path.string() + ".missing"), IoError);
  EXPECT_THROW(ExperimentConfig::from_json(json{{"scenario", "t6"}, {"trials", 0}}), ArgumentError);
}

TEST(Sweep, RowCountAndCsvSchema) {
  ExperimentConfig c = default_config("t6");
  c.T_grid = {3};
  c.n_grid = {1, 2, 3};
  c.trials = 2;
  const SweepResult r = run_sweep(c);
  ASSERT_EQ(r.rows.size(), 6u);
  EXPECT_EQ(csv_header(),
            "scenario,method,n,T,N,alpha,m_or_D,trial,reward_mean,reward_se,fitted_member,bound_overlay,seed");
  const std::string row = csv_row(r.rows[1]);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 12);
  EXPECT_EQ(row.rfind("agnostic_sft_failure,sft,1,3,,,,1,0,0,f1,1,", 0), 0u) << row;
  EXPECT_NE(r.rows[0].seed, r.rows[1].seed);
}

TEST(Sweep, DeterministicCsv) {
  for (const std::string scenario : {"t7", "c2", "t4"}) {
    ExperimentConfig c = default_config(scenario);
    c.trials = 2;
    c.mc_samples = 500;
    if (!c.n_grid.empty()) c.n_grid.resize(1);
    if (c.options.contains("configurations")) c.options["configurations"] = 2;
    EXPECT_EQ(csv_text(run_sweep(c)), csv_text(run_sweep(c))) << scenario;
  }
}

TEST(Sweep, SeedChangesOutput) {
  ExperimentConfig c = default_config("t7");
  c.trials = 3;
  c.T_grid = {4};
  c.n_grid = {1};
  const std::string a = csv_text(run_sweep(c));
  c.master_seed = 1;
  EXPECT_NE(a, csv_text(run_sweep(c)));
}

TEST(Sweep, SummaryJsonSchema) {
  ExperimentConfig c = default_config("t8");
  c.trials = 4;
  const SweepResult r = run_sweep(c);
  const json j = json::parse(summary_json(r, c));
  EXPECT_EQ(j.at("scenario"), "noisy_sft");
  EXPECT_EQ(j.at("config_digest"), config_digest(c));
  ASSERT_EQ(j.at("cells").size(), 1u);
  const json& cell = j.at("cells")[0];
  for (const char* key : {"coords", "mean", "se", "overlay", "pass"}) EXPECT_TRUE(cell.contains(key)) << key;
  EXPECT_EQ(cell.size(), 5u);
  EXPECT_EQ(cell.at("coords").at("n"), 8);
  EXPECT_TRUE(j.at("diagnostics").contains("cells"));
}

TEST(Sweep, CellStatistics) {
  std::vector<TrialRecord> rows(4);
  const double values[] = {1.0, 0.5, 0.5, 1.0};
  for (int i = 0; i < 4; ++i) {
    rows[i].reward_mean = values[i];
    rows[i].cell = i < 2 ? 0 : 1;
  }
  rows[3].cell = 2;
  rows[3].reward_se = 0.01;
  const auto cells = summarize_cells(rows);
  ASSERT_EQ(cells.size(), 3u);
  EXPECT_DOUBLE_EQ(cells[0].mean, 0.75);
  EXPECT_DOUBLE_EQ(cells[0].se, 0.25);
  EXPECT_DOUBLE_EQ(cells[2].se, 0.01);
}

TEST(Sweep, FlagsOutOfRegimeParameters) {
  ExperimentConfig c = default_config("t5");
  c.n_grid = {16};
  c.N_grid = {1};
  c.trials = 2;
  const SweepResult r = run_sweep(c);
  ASSERT_FALSE(r.flags.empty());
  EXPECT_NE(r.flags[0].find("m/2"), std::string::npos);
}

TEST(Format, Doubles) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(0.51075891650699178), "0.5107589165069918");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Descriptors, Classes) {
  const BuiltClass pair = build_class(json{{"kind", "counting_pair"}});
  EXPECT_EQ(pair.functions.size(), 2u);
  const BuiltClass shift = build_class(json{{"kind", "shift"}, {"D", 3}, {"T", 2}});
  EXPECT_EQ(shift.functions.size(), 4u);
  EXPECT_EQ(shift.prompt_length, 7u);
  const BuiltClass table = build_class(json{{"kind", "table"}, {"m", 3}, {"T", 2}});
  EXPECT_EQ(table.functions.size(), 8u);
  EXPECT_EQ(table.prompts.size(), 3u);
  EXPECT_THROW(build_class(json{{"kind", "shift"}, {"D", 3}}), ArgumentError);
  EXPECT_THROW(build_class(json{{"kind", "other"}}), ArgumentError);
  EXPECT_THROW(build_class(json::array()), ArgumentError);
}

TEST(Descriptors, PoliciesRoundTrip) {
  const FunctionClass F = make_shift_class(3, 2);
  const std::vector<json> cases{
      {{"kind", "deterministic"}, {"f", "f2"}},
      {{"kind", "uniform"}},
      {{"kind", "uniform_fixed_last"}, {"bit", 1}},
      {{"kind", "mixture"},
       {"components", {{{"weight", 0.25}, {"policy", {{"kind", "deterministic"}, {"f", "const0"}}}},
                       {{"weight", 0.75}, {"policy", {{"kind", "uniform"}}}}}}},
  };
  for (const auto& d : cases) EXPECT_EQ(policy_descriptor(build_policy(d, 2, &F)), d);
  EXPECT_EQ(build_policy(cases[0], 2, &F).function()->name(), "f2");
  EXPECT_THROW(build_policy(json{{"kind", "uniform_fixed_last"}, {"bit", 2}}, 2), ArgumentError);
  EXPECT_THROW(build_policy(json{{"kind", "deterministic"}, {"f", "f9"}}, 2, &F), ArgumentError);
}

TEST(SweepProperty, AgnosticSftRewardIsAlwaysZero) {
  Rng rng(5);
  for (int iter = 0; iter < 10; ++iter) {
    ExperimentConfig c = default_config("t6");
    c.master_seed = rng();
    c.T_grid = {testgen::between(rng, 2, 12)};
    c.n_grid = {testgen::between(rng, 1, 60)};
    c.trials = 3;
    for (const auto& row : run_sweep(c).rows) {
      EXPECT_EQ(row.reward_mean, 0.0);
      EXPECT_EQ(row.fitted_member, "f1");
    }
  }
}

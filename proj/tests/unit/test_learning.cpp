#include <gtest/gtest.h>

#include <algorithm>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "bitlab/learning.hpp"
#include "generators.hpp"

using namespace bitlab;

namespace {

BitString S(const char* text) { return BitString::parse(text); }

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("bitlab_" + name);
}

}  // namespace

TEST(Collect, RewardData) {
  Rng rng(1);
  const NextTokenFn f = make_shift_class(3, 2).member(2);
  const auto P = PromptDistribution::uniform_cube(7);
  const RewardFn r = end_token_reward(f, 2);
  EXPECT_THROW(collect_reward_data(P, ResponsePolicy::uniform(2), r, 0, rng), ArgumentError);
  const RewardDataset own = collect_reward_data(P, ResponsePolicy::deterministic(f, 2), r, 50, rng);
  for (const auto& rec : own.records()) EXPECT_EQ(rec.r, 1);
  const RewardDataset data = collect_reward_data(P, ResponsePolicy::uniform(2), r, 10000, rng);
  double mean = 0.0;
  for (const auto& rec : data.records()) mean += rec.r;
  mean /= 10000.0;
  EXPECT_LE(std::abs(mean - 0.5), 4.0 * std::sqrt(0.25 / 10000.0));
}

TEST(Collect, SftData) {
  Rng rng(2);
  const NextTokenFn f = last_bit_predictor();
  const auto P = PromptDistribution::uniform_cube(4);
  const SftDataset det = collect_sft_data(P, ResponsePolicy::deterministic(f, 3), 20, rng);
  for (const auto& rec : det.records()) EXPECT_EQ(rec.y, autoregress(f, rec.x, 3));
  const SftDataset fixed = collect_sft_data(P, ResponsePolicy::uniform_fixed_last(0, 3), 20, rng);
  for (const auto& rec : fixed.records()) EXPECT_EQ(last(rec.y), 0);
  const SftDataset point = collect_sft_data(PromptDistribution::point(S("01")), ResponsePolicy::uniform(2), 5, rng);
  ASSERT_EQ(point.size(), 5u);
  for (const auto& rec : point.records()) EXPECT_EQ(rec.x, S("01"));
}

TEST(Datasets, HorizonIsEnforced) {
  RewardDataset data;
  data.add(S("1"), S("01"), 1);
  EXPECT_EQ(data.horizon(), 2u);
  EXPECT_THROW(data.add(S("1"), S("011"), 1), ArgumentError);
  EXPECT_THROW(data.add(S("1"), S("01"), 2), ArgumentError);
}

TEST(Datasets, JsonLinesRoundTrip) {
  Rng rng(3);
  const auto P = PromptDistribution::uniform_cube(5);
  const RewardFn r = end_token_reward(constant_predictor(1), 3);
  const RewardDataset data = collect_reward_data(P, ResponsePolicy::uniform(3), r, 25, rng);
  const auto path = temp_file("reward.jsonl");
  write_jsonl(data, path);
  const RewardDataset back = read_reward_jsonl(path);
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back.records()[i].x, data.records()[i].x);
    EXPECT_EQ(back.records()[i].y, data.records()[i].y);
    EXPECT_EQ(back.records()[i].r, data.records()[i].r);
  }
  const SftDataset sft = collect_sft_data(P, ResponsePolicy::uniform(3), 7, rng);
  const auto sft_path = temp_file("sft.jsonl");
  write_jsonl(sft, sft_path);
  EXPECT_EQ(read_sft_jsonl(sft_path).records()[6].y, sft.records()[6].y);
}

TEST(Datasets, MalformedLinesReportPathAndLine) {
  const auto path = temp_file("bad.jsonl");
  {
    std::ofstream out(path);
    out << R"({"x":"01","y":"1","r":1})" << "\n" << R"({"x":"01","y":"12","r":1})" << "\n";
  }
  try {
    read_reward_jsonl(path);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(path.string() + ":2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read_sft_jsonl(temp_file("missing.jsonl")), IoError);
}

TEST(RewardLoss, RealizableComplementAndCrafted) {
  Rng rng(4);
  const NextTokenFn f = last_bit_predictor();
  const RewardFn r = end_token_reward(f, 2);
  const RewardDataset data = collect_reward_data(PromptDistribution::uniform_cube(3), ResponsePolicy::uniform(2), r, 40, rng);
  EXPECT_EQ(empirical_reward_loss(r, data), 0u);
  const RewardFn flipped = RewardFn::custom("flip", 2, [r](BitView x, BitView y) { return 1.0 - r(x, y); }, true);
  EXPECT_EQ(empirical_reward_loss(flipped, data), 40u);

  // f1 ends "01" with 1, so the end-token reward of f1 is 1{y[-1] = 1} there;
  // f2 ends "01" with 0.
  const FunctionClass pair = make_counting_pair(2);
  RewardDataset crafted;
  crafted.add(S("01"), S("11"), 1);
  crafted.add(S("01"), S("10"), 1);
  crafted.add(S("01"), S("00"), 0);
  EXPECT_EQ(empirical_reward_loss(end_token_reward(pair.member(0), 2), crafted), 1u);
  EXPECT_EQ(empirical_reward_loss(end_token_reward(pair.member(1), 2), crafted), 2u);
}

TEST(RewardErm, RealizableAndTies) {
  Rng rng(5);
  const FunctionClass F = make_shift_class(4, 2);
  const RewardClass R = induce_reward_class(F, RewardKind::end_token);
  const RewardFn r = R.member(3);
  const RewardDataset data = collect_reward_data(PromptDistribution::uniform_cube(9), ResponsePolicy::uniform(2), r, 64, rng);
  const RewardFit fit = fit_reward_erm(R, data, rng);
  EXPECT_EQ(fit.loss, 0u);
  EXPECT_EQ(fit.index, 3u);

  const FunctionClass twins({constant_predictor(0), lookup_predictor("zero", {S("1")}, {0})}, 2);
  const RewardClass RT = induce_reward_class(twins, RewardKind::end_token);
  RewardDataset tie;
  tie.add(S("1"), S("00"), 1);
  std::uint64_t first = 0;
  for (int i = 0; i < 10000; ++i) first += fit_reward_erm(RT, tie, rng).index == 0 ? 1 : 0;
  EXPECT_LE(std::abs(first / 10000.0 - 0.5), 4.0 * std::sqrt(0.25 / 10000.0));

  const RewardFit empty = fit_reward_erm(R, RewardDataset(2), rng);
  EXPECT_EQ(empty.loss, 0u);
  EXPECT_EQ(empty.minimizers, R.size());
}

TEST(NtpErm, CountingPairAlwaysPicksF1) {
  Rng rng(6);
  for (std::size_t T : {2, 4, 8, 16}) {
    const FunctionClass F = make_counting_pair(T);
    const auto pi = ResponsePolicy::deterministic(constant_predictor(0), T);
    for (std::uint64_t n : {1, 5, 20, 50}) {
      const SftDataset data = collect_sft_data(PromptDistribution::point(S("01")), pi, n, rng);
      EXPECT_EQ(ntp_loss(F.member(0), data), n);
      EXPECT_EQ(ntp_loss(F.member(1), data), n * T);
      const NtpFit fit = fit_ntp_erm(F, data, rng);
      EXPECT_EQ(fit.f.name(), "f1");
      EXPECT_EQ(fit.loss, n);
    }
  }
}

TEST(NtpErm, RealizableInterpolates) {
  Rng rng(7);
  const FunctionClass F = make_shift_class(5, 3);
  const auto pi = ResponsePolicy::deterministic(F.member(2), 3);
  const SftDataset data = collect_sft_data(PromptDistribution::uniform_cube(16), pi, 30, rng);
  EXPECT_EQ(ntp_loss(F.member(2), data), 0u);
  const NtpFit fit = fit_ntp_erm(F, data, rng);
  EXPECT_EQ(fit.loss, 0u);
  for (const auto& rec : data.records()) EXPECT_EQ(autoregress(fit.f, rec.x, 3), rec.y);
  EXPECT_EQ(fit_ntp_erm(F, SftDataset(3), rng).minimizers, F.size());
}

TEST(ErmProperty, FactorisedTableSearchMatchesExhaustive) {
  Rng rng(8);
  for (int iter = 0; iter < 60; ++iter) {
    const std::size_t m = testgen::between(rng, 1, 6);
    const std::size_t T = testgen::between(rng, 1, 3);
    const TableConstruction t = make_table_class(m, T);
    const auto P = PromptDistribution::uniform(t.prompts);
    const NextTokenFn target = lookup_predictor("target", t.prompts, testgen::labels(rng, m));
    const std::uint64_t n = testgen::between(rng, 1, 12);

    const RewardClass R = induce_reward_class(t.functions, RewardKind::end_token);
    const RewardDataset rd = collect_reward_data(P, ResponsePolicy::uniform(T), end_token_reward(target, T), n, rng);
    const RewardFit fast = fit_reward_erm(R, rd, rng);
    const RewardFit slow = fit_reward_erm(R, rd, rng, ErmSearch::exhaustive);
    EXPECT_EQ(fast.loss, slow.loss);
    EXPECT_EQ(fast.minimizers, slow.minimizers);
    EXPECT_EQ(reward_losses(R, rd)[fast.index], fast.loss);

    const SftDataset sd = collect_sft_data(P, testgen::small_policy(rng, t.functions), n, rng);
    const NtpFit nf = fit_ntp_erm(t.functions, sd, rng);
    const NtpFit ns = fit_ntp_erm(t.functions, sd, rng, ErmSearch::exhaustive);
    EXPECT_EQ(nf.loss, ns.loss);
    EXPECT_EQ(nf.minimizers, ns.minimizers);
    EXPECT_EQ(ntp_losses(t.functions, sd)[nf.index], nf.loss);
  }
}

TEST(BestOfN, SelectionBasics) {
  Rng rng(9);
  const RewardFn r = end_token_reward(constant_predictor(0), 2);
  const auto base = ResponsePolicy::uniform(2);
  EXPECT_THROW(bon_select(r, base, S("1"), 0, rng), ArgumentError);
  const BonPolicy one(r, base, 1);
  for (const auto& [y, p] : one.distribution(S("1"))) EXPECT_DOUBLE_EQ(p, 0.25);
  const BonPolicy two(r, base, 2);
  double hit = 0.0;
  for (const auto& [y, p] : two.distribution(S("1"))) hit += p * r(S("1"), y);
  EXPECT_DOUBLE_EQ(hit, 0.75);

  const RewardFn flat = RewardFn::custom("flat", 2, [](BitView, BitView) { return 0.5; });
  const BonPolicy flat_bon(flat, base, 8);
  for (const auto& [y, p] : flat_bon.distribution(S("1"))) EXPECT_NEAR(p, 0.25, 1e-15);
}

TEST(BestOfNProperty, ExactLawMatchesSampling) {
  Rng rng(10);
  for (int iter = 0; iter < 8; ++iter) {
    const std::size_t T = testgen::between(rng, 1, 3);
    std::size_t L = 0;
    const FunctionClass F = testgen::small_class(rng, T, &L);
    const auto base = testgen::small_policy(rng, F);
    const RewardFn verifier = end_token_reward(F.member(rng.uniform_index(F.size())), T);
    const BonPolicy bon(verifier, base, testgen::between(rng, 1, 6));
    const BitString x = testgen::bits(rng, L);
    const std::uint64_t draws = 40000;
    std::map<BitString, std::uint64_t> counts;
    for (std::uint64_t i = 0; i < draws; ++i) ++counts[bon.sample(x, rng)];
    for (const auto& [y, p] : bon.distribution(x)) {
      const double f = static_cast<double>(counts[y]) / draws;
      EXPECT_LE(std::abs(f - p), 4.0 * std::sqrt(p * (1 - p) / draws) + 1e-12) << base.describe() << " y=" << y;
    }
  }
}

TEST(ChooseN, Realizable) {
  EXPECT_EQ(choose_N_realizable(1, 0.5), 1u);
  EXPECT_EQ(choose_N_realizable(16, 0.5), 4u);
  EXPECT_EQ(choose_N_realizable(1000, 1.0), 1u);
  EXPECT_EQ(choose_N_realizable(1024, 0.5), 10u);
  EXPECT_THROW(choose_N_realizable(16, 0.0), ArgumentError);
  EXPECT_THROW(choose_N_realizable(0, 0.5), ArgumentError);
}

TEST(ChooseN, Agnostic) {
  const NChoice c = choose_N_agnostic_from_H(0.5, 0.1, 0.05);
  EXPECT_EQ(c.N, 3u);
  EXPECT_NEAR(c.raw, 2.20819922122131, 1e-12);
  const NChoice degenerate = choose_N_agnostic_from_H(0.5, 0.0, 0.0);
  EXPECT_TRUE(degenerate.degenerate);
  EXPECT_EQ(degenerate.N, 1u);
  EXPECT_EQ(choose_N_agnostic(4096, 0.5, 0.125, 7, 0.1).N, 3u);
  EXPECT_EQ(choose_N_agnostic(4096, 0.5, 0.25, 3, 0.1).N, 2u);
  EXPECT_THROW(choose_N_agnostic(10, 0.5, 0.1, 2, 1.0), ArgumentError);
}

#include <gtest/gtest.h>

#include <algorithm>

#include <cmath>
#include <limits>

#include <json.hpp>

#include "bitlab/oracle.hpp"
#include "generators.hpp"

using namespace bitlab;

namespace {

BitString S(const char* text) { return BitString::parse(text); }

BinaryBehaviorClass constants(std::size_t points) {
  std::vector<std::string> names{"zero", "one"};
  std::vector<std::string> labels;
  for (std::size_t p = 0; p < points; ++p) labels.push_back("p" + std::to_string(p));
  return BinaryBehaviorClass(names, labels, {std::vector<Bit>(points, 0), std::vector<Bit>(points, 1)});
}

BinaryBehaviorClass random_class(Rng& rng, std::size_t functions, std::size_t points) {
  std::vector<std::string> names;
  std::vector<std::string> labels;
  std::vector<std::vector<Bit>> table;
  for (std::size_t f = 0; f < functions; ++f) {
    names.push_back("g" + std::to_string(f));
    table.push_back(testgen::labels(rng, points));
  }
  for (std::size_t p = 0; p < points; ++p) labels.push_back("p" + std::to_string(p));
  return BinaryBehaviorClass(names, labels, table);
}

}  // namespace

TEST(Shatter, Constants) {
  EXPECT_TRUE(shatter_check(constants(1), {0}));
  EXPECT_FALSE(shatter_check(constants(2), {0, 1}));
  const BinaryBehaviorClass full({"a", "b", "c", "d"}, {"p", "q"}, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  EXPECT_TRUE(shatter_check(full, {0, 1}));
  EXPECT_THROW(shatter_check(full, {0, 2}), RangeError);
}

TEST(Shatter, CertificateJson) {
  const ShatterCertificate cert = shatter_certificate(constants(2), {0, 1});
  EXPECT_FALSE(cert.shattered);
  auto missing = cert.missing;
  std::ranges::sort(missing);
  EXPECT_EQ(missing, (std::vector<std::string>{"01", "10"}));
  const auto j = nlohmann::json::parse(cert.to_json());
  EXPECT_EQ(j.at("witnesses").at("00"), "zero");
  EXPECT_EQ(j.at("witnesses").at("11"), "one");
  EXPECT_FALSE(j.at("shattered").get<bool>());
}

TEST(Vc, KnownDimensions) {
  EXPECT_EQ(vc_dimension(constants(3)), 1u);
  const BinaryBehaviorClass single({"only"}, {"p", "q"}, {{0, 1}});
  EXPECT_EQ(vc_dimension(single), 0u);
  for (std::size_t m : {1, 2, 3, 5}) {
    const TableConstruction t = make_table_class(m, 2);
    EXPECT_EQ(vc_dimension(end_token_behaviors(t.functions, t.prompts)), m);
  }
}

TEST(Growth, Counts) {
  EXPECT_EQ(growth_function(constants(3), {0, 1, 2}), 2u);
  const BinaryBehaviorClass full({"a", "b", "c", "d"}, {"p", "q"}, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  EXPECT_EQ(growth_function(full, {0, 1}), 4u);
  Rng rng(1);
  for (std::size_t D : {2, 3, 6}) {
    std::vector<BitString> prompts;
    for (int k = 0; k < 4; ++k) prompts.push_back(testgen::bits(rng, D * 2 + 1));
    const auto behaviors = end_token_behaviors(make_shift_class(D, 2), prompts);
    EXPECT_LE(growth_function(behaviors, {0, 1, 2, 3}), std::min<std::uint64_t>(16, D + 1));
  }
}

TEST(Panels, Shapes) {
  EXPECT_EQ(strings_of_lengths(2, 3).size(), 12u);
  EXPECT_EQ(strings_of_lengths(2, 3).front(), S("00"));
  const auto panel = prompt_response_panel(2, 3);
  ASSERT_EQ(panel.size(), 32u);
  EXPECT_EQ(panel.back().first, S("11"));
  EXPECT_EQ(panel.back().second, S("111"));
  const auto R = reward_behaviors(induce_reward_class(make_counting_pair(3), RewardKind::end_token), panel);
  EXPECT_EQ(R.points().front(), "00|000");
}

TEST(Kl, Values) {
  EXPECT_EQ(kl_bernoulli(0.5, 0.5), 0.0);
  EXPECT_NEAR(kl_bernoulli(0.25, 0.5), 0.130812035941137, 1e-13);
  EXPECT_NEAR(kl_bernoulli(0.0, 0.5), std::log(2.0), 1e-15);
  EXPECT_EQ(kl_bernoulli(0.3, 0.0), std::numeric_limits<double>::infinity());
  EXPECT_EQ(kl_bernoulli(1.0, 1.0), 0.0);
}

TEST(DeltaTerm, Values) {
  EXPECT_NEAR(delta_term(0.5, 0.5, 15), 12.4766492500790, 1e-12);
  EXPECT_NEAR(delta_term(0.1, 0.5, 3), std::log(20.0) + 4.0 * std::log(4.0), 1e-12);
  EXPECT_NEAR(delta_term(0.1, 0.2, 3) - delta_term(0.1, 0.8, 3), 0.0, 1e-12);
  EXPECT_THROW(delta_term(1.0, 0.5, 3), ArgumentError);
  EXPECT_THROW(delta_term(0.1, 0.0, 3), ArgumentError);
}

TEST(MinBinomial, Basics) {
  Rng rng(2);
  double total = 0.0;
  for (int i = 0; i < 4000; ++i) total += sample_min_binomial(1, 50, 0.3, rng);
  const double mean = total / 4000.0;
  EXPECT_LE(std::abs(mean - 0.3), 4.0 * std::sqrt(0.3 * 0.7 / 50.0 / 4000.0));
  EXPECT_EQ(sample_min_binomial(8, 20, 0.0, rng), 0.0);
}

TEST(MinBinomial, LowerTailAgainstDeltaTerm) {
  // With log r > delta_term, the minimum of r binomials sits below p with
  // KL inside [log r - delta_term, log r + delta_term] in most repetitions.
  Rng rng(3);
  const std::uint64_t r = 1024;
  const std::uint64_t n = 100;
  const double p = 0.5;
  const double delta = 0.1;
  const double band = delta_term(delta, p, n);
  const double logr = std::log(static_cast<double>(r));
  int inside = 0;
  const int reps = 200;
  for (int i = 0; i < reps; ++i) {
    const double z = sample_min_binomial(r, n, p, rng);
    const double kl = kl_bernoulli(z, p);
    if (z < p && std::abs(kl - logr) <= band) ++inside;
  }
  EXPECT_GE(inside, static_cast<int>((1.0 - delta) * reps));
}

TEST(Kappa, ExactCases) {
  const FunctionClass F = make_shift_class(3, 2);
  const auto P = PromptDistribution::uniform_cube(7);
  const auto base = ResponsePolicy::uniform(2);
  const RewardClass R = induce_reward_class(F, RewardKind::end_token);
  EXPECT_EQ(compute_kappa(R, R.member(2), P, base), 0.0);

  const RewardFn truth = R.member(0);
  const RewardFn complement = RewardFn::custom("complement", 2, [truth](BitView x, BitView y) { return 1.0 - truth(x, y); }, true);
  EXPECT_EQ(compute_kappa(std::vector<RewardFn>{complement}, truth, P, base), 1.0);

  // Two prompts x T=2 responses = 8 equiprobable cells; the best member misses one.
  const auto prompts = std::vector<BitString>{S("10"), S("11")};
  const auto Q = PromptDistribution::uniform(prompts);
  const RewardFn target = RewardFn::custom("target", 2, [](BitView, BitView y) { return y[1] == 0 ? 1.0 : 0.0; }, true);
  const RewardFn near = RewardFn::custom("near", 2, [](BitView x, BitView y) {
    if (x[1] == 1 && y[0] == 1 && y[1] == 1) return 1.0;
    return y[1] == 0 ? 1.0 : 0.0;
  }, true);
  const RewardFn far = RewardFn::custom("far", 2, [](BitView, BitView y) { return y[1] == 1 ? 1.0 : 0.0; }, true);
  EXPECT_EQ(compute_kappa(std::vector<RewardFn>{far, near}, target, Q, base), 0.125);
}

TEST(Kappa, MonteCarloAgrees) {
  Rng rng(4);
  const auto prompts = table_prompts(4);
  const TableConstruction t = make_pinned_table_class({Bit{1}, std::nullopt, std::nullopt, std::nullopt}, 2);
  const RewardFn truth = end_token_reward(lookup_predictor("t", prompts, {0, 1, 1, 0}), 2);
  const auto members = induce_reward_class(t.functions, RewardKind::end_token);
  std::vector<RewardFn> list;
  for (std::uint64_t i = 0; i < members.size(); ++i) list.push_back(members.member(i));
  const auto P = PromptDistribution::uniform(prompts);
  const auto base = ResponsePolicy::uniform(2);
  EXPECT_EQ(compute_kappa(members, truth, P, base), 0.25);
  const Estimate mc = compute_kappa_mc(list, truth, P, base, 100000, rng);
  EXPECT_LE(std::abs(mc.value - 0.25), 4.0 * std::sqrt(0.25 * 0.75 / 100000.0));
}

TEST(BoundH, Values) {
  EXPECT_NEAR(bound_H(1, 0.0, std::exp(-1.0)), 1.0, 1e-15);
  EXPECT_NEAR(bound_H(400, 3.0, 0.1), bound_H(100, 3.0, 0.1) / 2.0, 1e-15);
  EXPECT_NEAR(bound_H(100, 3.0, 0.1), 0.230273426451991, 1e-14);
  EXPECT_LT(bound_H(10, 0.0, 1.0 - 1e-12), 1e-5);
  EXPECT_THROW(bound_H(0, 1.0, 0.1), ArgumentError);
  EXPECT_THROW(bound_H(10, 1.0, 1.0), ArgumentError);
}

TEST(Overlays, FrozenValues) {
  EXPECT_NEAR(1.0 - agnostic_bon_risk_limit(0.125, 0.5), 0.51075891650699, 1e-13);
  EXPECT_NEAR(1.0 - agnostic_bon_risk_limit(0.25, 0.5), 0.27151783301398, 1e-13);
  EXPECT_NEAR(agnostic_bon_risk(0.1, 0.05, 0.5), 0.547634139316541, 1e-13);
  EXPECT_NEAR(finite_bon_risk(16, 17.0, 0.5, 0.1), 1.34644960926257, 1e-13);
  EXPECT_NEAR(realizable_sft_risk(16, 4, 4.0, 0.1), 0.546077385930995, 1e-13);
  EXPECT_NEAR(noisy_sft_risk(8, 8, 17.0, 0.1), 6.40986641798424, 1e-12);
  EXPECT_EQ(reward_overlay(1.5), 0.0);
  EXPECT_EQ(reward_overlay(-0.1), 1.0);
  EXPECT_DOUBLE_EQ(reward_overlay(0.25), 0.75);
}

TEST(OracleProperty, GrowthAndVcBounds) {
  Rng rng(5);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t functions = testgen::between(rng, 1, 12);
    const std::size_t points = testgen::between(rng, 1, 7);
    const BinaryBehaviorClass C = random_class(rng, functions, points);
    std::vector<std::size_t> all(points);
    for (std::size_t p = 0; p < points; ++p) all[p] = p;
    const auto growth = growth_function(C, all);
    EXPECT_LE(growth, std::min<std::uint64_t>(functions, std::uint64_t{1} << points));
    const VcResult vc = vc_search(C);
    EXPECT_LE(std::uint64_t{1} << vc.dimension, functions);
    EXPECT_EQ(vc.witness.size(), vc.dimension);
    EXPECT_TRUE(shatter_check(C, vc.witness));
    // Every subset of a shattered set is shattered.
    for (std::size_t drop = 0; drop < vc.witness.size(); ++drop) {
      auto subset = vc.witness;
      subset.erase(subset.begin() + static_cast<std::ptrdiff_t>(drop));
      EXPECT_TRUE(shatter_check(C, subset));
    }
    // No larger set is shattered.
    if (vc.dimension < points) {
      for (int trial = 0; trial < 5; ++trial) {
        std::vector<std::size_t> pick;
        for (std::size_t p = 0; p < points; ++p) {
          if (pick.size() < vc.dimension + 1 && rng.bit()) pick.push_back(p);
        }
        if (pick.size() == vc.dimension + 1) EXPECT_FALSE(shatter_check(C, pick));
      }
    }
  }
}

TEST(OracleProperty, KlIsNonNegativeAndZeroOnDiagonal) {
  Rng rng(6);
  for (int iter = 0; iter < 500; ++iter) {
    const double a = rng.uniform01();
    const double b = 0.001 + 0.998 * rng.uniform01();
    EXPECT_GE(kl_bernoulli(a, b), 0.0);
    EXPECT_NEAR(kl_bernoulli(b, b), 0.0, 1e-15);
  }
}

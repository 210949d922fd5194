#include <gtest/gtest.h>

#include <algorithm>

#include "bitlab/rewards.hpp"
#include "generators.hpp"

using namespace bitlab;

namespace {

BitString S(const char* text) { return BitString::parse(text); }

}  // namespace

TEST(EndToken, ComparesLastSymbols) {
  const RewardFn r = end_token_reward(constant_predictor(0), 5);
  EXPECT_EQ(r(S("101"), S("11110")), 1.0);
  EXPECT_EQ(r(S("101"), S("00001")), 0.0);
  EXPECT_THROW(r(S("101"), S("0000")), ArgumentError);
  EXPECT_EQ(r.name(), "end_token(const0)");
}

TEST(EndToken, CountingPairTrajectory) {
  const RewardFn r = end_token_reward(make_counting_pair(4).member(1), 4);
  EXPECT_EQ(r(S("01"), S("1110")), 1.0);
  EXPECT_EQ(r.target_response(S("01")), S("1000"));
}

TEST(ZeroOne, ExactMatch) {
  const NextTokenFn f = last_bit_predictor();
  const RewardFn r = zero_one_reward(f, 4);
  const BitString x = S("0011");
  EXPECT_EQ(r(x, autoregress(f, x, 4)), 1.0);
  EXPECT_EQ(r(x, S("1011")), 0.0);
  EXPECT_EQ(r(x, S("1101")), 0.0);
}

TEST(ZeroOne, UniformResponseMeanIsOneEighth) {
  const RewardFn r = zero_one_reward(constant_predictor(0), 3);
  double total = 0.0;
  for (const auto& y : all_strings(3)) total += r(S("1"), y);
  EXPECT_EQ(total / 8.0, 0.125);
}

TEST(Custom, ValidatesRange) {
  const RewardFn ok = RewardFn::custom("half", 2, [](BitView, BitView) { return 0.5; });
  EXPECT_EQ(ok(S("1"), S("01")), 0.5);
  EXPECT_FALSE(ok.binary());
  const RewardFn bad = RewardFn::custom("bad", 2, [](BitView, BitView) { return 1.5; });
  EXPECT_THROW(bad(S("1"), S("01")), ArgumentError);
}

TEST(RewardClassTest, IndexedNotDeduplicated) {
  EXPECT_EQ(induce_reward_class(make_counting_pair(), RewardKind::end_token).size(), 2u);
  EXPECT_EQ(induce_reward_class(make_shift_class(3, 2), RewardKind::zero_one).size(), 4u);
  // Two predictors with the same end-token behaviour on every prompt stay two members.
  const FunctionClass twins({constant_predictor(0), lookup_predictor("zero", {S("1")}, {0})}, 2);
  const RewardClass R = induce_reward_class(twins, RewardKind::end_token);
  ASSERT_EQ(R.size(), 2u);
  EXPECT_EQ(R.member(0)(S("1"), S("10")), R.member(1)(S("1"), S("10")));
  EXPECT_THROW(induce_reward_class(twins, RewardKind::custom), ArgumentError);
}

TEST(RewardKindText, RoundTrip) {
  for (auto k : {RewardKind::end_token, RewardKind::zero_one, RewardKind::custom}) {
    EXPECT_EQ(parse_reward_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_reward_kind("other"), ArgumentError);
}

TEST(Margin, BinaryRewardIsStrictAtOne) {
  const RewardFn r = end_token_reward(constant_predictor(0), 2);
  const std::vector<BitString> prompts{S("0"), S("1")};
  EXPECT_TRUE(margin_check(r, prompts, 0.999).holds);
  const MarginReport at_one = margin_check(r, prompts, 1.0);
  EXPECT_FALSE(at_one.holds);
  EXPECT_TRUE(at_one.holds_non_strict);
  EXPECT_TRUE(at_one.binary);
  EXPECT_EQ(at_one.worst_gap, std::optional<double>(1.0));
  EXPECT_THROW(margin_check(r, prompts, 0.0), ArgumentError);
}

TEST(Margin, ConstantRewardIsDegenerate) {
  const RewardFn one = RewardFn::custom("one", 2, [](BitView, BitView) { return 1.0; }, true);
  const MarginReport report = margin_check(one, {S("0")}, 0.5);
  EXPECT_EQ(report.degenerate_prompts, std::vector<std::size_t>{0});
  EXPECT_FALSE(report.worst_gap.has_value());
}

TEST(Margin, ThreeLevelCustom) {
  const RewardFn r = RewardFn::custom("levels", 2, [](BitView, BitView y) {
    const int v = 2 * y[0] + y[1];
    return v == 3 ? 1.0 : (v == 2 ? 0.4 : 0.0);
  });
  const MarginReport report = margin_check(r, {S("0")}, 0.5);
  EXPECT_TRUE(report.holds);
  EXPECT_NEAR(*report.worst_gap, 0.6, 1e-15);
  EXPECT_FALSE(margin_check(r, {S("0")}, 0.6).holds);
}

TEST(RewardProperty, InducedRewardsMatchDefinitions) {
  Rng rng(31);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t T = testgen::between(rng, 1, 4);
    std::size_t L = 0;
    const FunctionClass F = testgen::small_class(rng, T, &L);
    const NextTokenFn f = F.member(rng.uniform_index(F.size()));
    const BitString x = testgen::bits(rng, L);
    const BitString y = testgen::bits(rng, T);
    const BitString traj = autoregress(f, x, T);
    const double end = end_token_reward(f, T)(x, y);
    const double zo = zero_one_reward(f, T)(x, y);
    EXPECT_EQ(end, last(y) == last(traj) ? 1.0 : 0.0);
    EXPECT_EQ(zo, y == traj ? 1.0 : 0.0);
    EXPECT_LE(zo, end);
    EXPECT_EQ(end_token_reward(f, T)(x, traj), 1.0);
  }
}

#include <gtest/gtest.h>

#include <algorithm>

#include "bitlab/classes.hpp"
#include "generators.hpp"

using namespace bitlab;

namespace {

BitString S(const char* text) { return BitString::parse(text); }

}  // namespace

TEST(BitString, ParseAndPrint) {
  EXPECT_EQ(S("0110").str(), "0110");
  EXPECT_TRUE(S("").empty());
  EXPECT_THROW(S("012"), ArgumentError);
  EXPECT_THROW(BitString(std::vector<Bit>{0, 2}), ArgumentError);
}

TEST(BitString, Concat) {
  EXPECT_EQ(concat(S("01"), S("1")), S("011"));
  EXPECT_EQ(concat(S(""), S("101")), S("101"));
  EXPECT_EQ(concat(S("1"), S("")), S("1"));
}

TEST(BitString, ElementPrefixLast) {
  EXPECT_EQ(element(S("011"), 2), 1);
  EXPECT_EQ(element(S("011"), -3), 0);
  EXPECT_EQ(prefix(S("011"), 0), S(""));
  EXPECT_EQ(prefix(S("011"), 2), S("01"));
  EXPECT_EQ(last(S("0110")), 0);
  EXPECT_THROW(element(S("011"), 3), RangeError);
  EXPECT_THROW(element(S("011"), -4), RangeError);
  EXPECT_THROW(prefix(S("011"), 4), RangeError);
  EXPECT_THROW(last(S("")), RangeError);
}

TEST(BitString, AppendStep) {
  EXPECT_EQ(append_step(constant_predictor(0), S("1")), S("10"));
  EXPECT_EQ(append_step(last_bit_predictor(), S("01")), S("011"));
  EXPECT_EQ(append_step(constant_predictor(1), S("")), S("1"));
  EXPECT_THROW(append_step(constant_predictor(0), S("11"), 2), ResourceError);
}

TEST(BitString, Autoregress) {
  const FunctionClass pair = make_counting_pair(4);
  EXPECT_EQ(autoregress(constant_predictor(0), S("01"), 4), S("0000"));
  EXPECT_EQ(autoregress(pair.member(0), S("01"), 3), S("111"));
  EXPECT_EQ(autoregress(pair.member(1), S("01"), 4), S("1000"));
  EXPECT_THROW(autoregress(constant_predictor(0), S("01"), 0), ArgumentError);
  EXPECT_THROW(autoregress(constant_predictor(0), S("01"), 3, 4), ResourceError);
}

TEST(BitString, AllStringsAndBinary) {
  const auto strings = all_strings(3);
  ASSERT_EQ(strings.size(), 8u);
  EXPECT_EQ(strings.front(), S("000"));
  EXPECT_EQ(strings[5], S("101"));
  EXPECT_EQ(to_binary(6, 4), S("0110"));
  EXPECT_EQ(all_strings(0).size(), 1u);
  EXPECT_THROW(all_strings(40), ResourceError);
}

TEST(BitStringProperty, AutoregressIsTeacherForcedConsistent) {
  Rng rng(11);
  const auto rules = std::vector<NextTokenFn>{constant_predictor(1), last_bit_predictor(),
                                              make_counting_pair(2).member(0), make_counting_pair(2).member(1)};
  for (int iter = 0; iter < 300; ++iter) {
    const BitString x = testgen::string_up_to(rng, 12);
    const std::size_t T = testgen::between(rng, 1, 8);
    const NextTokenFn& f = rules[rng.uniform_index(rules.size())];
    const BitString y = autoregress(f, x, T);
    ASSERT_EQ(y.size(), T);
    for (std::size_t t = 0; t < T; ++t) {
      ASSERT_EQ(y[t], f(concat(x, prefix(y, t))));
    }
    EXPECT_EQ(teacher_forced_errors(f, x, y), 0u);
  }
}

TEST(BitStringProperty, ConcatAndPrefixRoundTrip) {
  Rng rng(12);
  for (int iter = 0; iter < 300; ++iter) {
    const BitString a = testgen::string_up_to(rng, 20);
    const BitString b = testgen::string_up_to(rng, 20);
    const BitString ab = concat(a, b);
    ASSERT_EQ(ab.size(), a.size() + b.size());
    EXPECT_EQ(prefix(ab, a.size()), a);
    if (!b.empty()) EXPECT_EQ(last(ab), last(b));
    EXPECT_EQ(BitString::parse(ab.str()), ab);
  }
}

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bitlab/classes.hpp"

namespace bitlab {

enum class RewardKind { end_token, zero_one, custom };

std::string_view to_string(RewardKind kind);
/// Accepts "end_token", "zero_one", "custom".
RewardKind parse_reward_kind(std::string_view text);

/// r(x, y) with y of length exactly T.
///
/// Induced kinds compare y against the target's trajectory on x; custom
/// rewards wrap an arbitrary [0,1]-valued rule.
class RewardFn {
 public:
  using Rule = std::function<double(BitView x, BitView y)>;

  static RewardFn end_token(NextTokenFn target, std::size_t horizon);
  static RewardFn zero_one(NextTokenFn target, std::size_t horizon);
  /// `reads` lists the prompt coordinates the rule depends on, given the prompt length.
  static RewardFn custom(std::string name, std::size_t horizon, Rule rule, bool binary = false,
                         std::function<Dependence(std::size_t)> reads = {});

  /// Throws ArgumentError when len(y) != T.
  double operator()(BitView x, BitView y) const;

  RewardKind kind() const { return kind_; }
  std::size_t horizon() const { return horizon_; }
  bool binary() const { return kind_ != RewardKind::custom || binary_; }
  const std::string& name() const { return name_; }
  /// Target predictor of an induced reward; null for custom rewards.
  const NextTokenFn* target() const { return target_ ? &*target_ : nullptr; }

  /// f_*^AR(x). Only for induced kinds.
  BitString target_response(BitView x) const;
  /// Induced value given a precomputed target trajectory.
  Bit compare(BitView trajectory, BitView y) const;

  Dependence prompt_dependence(std::size_t prompt_length) const;

 private:
  RewardFn() = default;

  RewardKind kind_ = RewardKind::custom;
  std::size_t horizon_ = 1;
  std::string name_;
  std::optional<NextTokenFn> target_;
  Rule rule_;
  bool binary_ = false;
  std::function<Dependence(std::size_t)> reads_;
};

RewardFn end_token_reward(NextTokenFn target, std::size_t horizon);
RewardFn zero_one_reward(NextTokenFn target, std::size_t horizon);

/// R_F: one induced reward per member of F, same order. Lazy; never deduplicated.
class RewardClass {
 public:
  RewardClass(FunctionClass functions, RewardKind kind);

  std::uint64_t size() const { return functions_.size(); }
  RewardKind kind() const { return kind_; }
  std::size_t horizon() const { return functions_.horizon(); }
  const FunctionClass& functions() const { return functions_; }
  RewardFn member(std::uint64_t index) const;

 private:
  FunctionClass functions_;
  RewardKind kind_;
};

/// Throws ArgumentError for RewardKind::custom.
RewardClass induce_reward_class(FunctionClass functions, RewardKind kind);

struct MarginReport {
  bool holds = false;             // every non-degenerate prompt has gap > sigma
  bool holds_non_strict = false;  // gap >= sigma; the reading used for binary rewards
  bool binary = false;
  std::optional<double> worst_gap;  // empty when every prompt is degenerate
  std::size_t worst_prompt = 0;
  std::vector<std::size_t> degenerate_prompts;  // constant reward over Σ^T
};

/// Gap between the best reward value and the best value outside the argmax
/// set, per prompt, by enumerating Σ^T. Throws ResourceError when 2^T exceeds
/// the budget, ArgumentError when sigma <= 0.
MarginReport margin_check(const RewardFn& r, const std::vector<BitString>& prompts, double sigma);

}  // namespace bitlab

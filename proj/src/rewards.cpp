#include "bitlab/rewards.hpp"

#include <algorithm>
#include <cmath>

namespace bitlab {

std::string_view to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::end_token:
      return "end_token";
    case RewardKind::zero_one:
      return "zero_one";
    case RewardKind::custom:
      return "custom";
  }
  return "custom";
}

RewardKind parse_reward_kind(std::string_view text) {
  if (text == "end_token") return RewardKind::end_token;
  if (text == "zero_one") return RewardKind::zero_one;
  if (text == "custom") return RewardKind::custom;
  throw ArgumentError("unknown reward kind \"" + std::string(text) + "\"");
}

RewardFn RewardFn::end_token(NextTokenFn target, std::size_t horizon) {
  if (horizon == 0) throw ArgumentError("end_token_reward: T must be at least 1");
  RewardFn r;
  r.kind_ = RewardKind::end_token;
  r.horizon_ = horizon;
  r.name_ = "end_token(" + target.name() + ")";
  r.target_ = std::move(target);
  return r;
}

RewardFn RewardFn::zero_one(NextTokenFn target, std::size_t horizon) {
  if (horizon == 0) throw ArgumentError("zero_one_reward: T must be at least 1");
  RewardFn r;
  r.kind_ = RewardKind::zero_one;
  r.horizon_ = horizon;
  r.name_ = "zero_one(" + target.name() + ")";
  r.target_ = std::move(target);
  return r;
}

RewardFn RewardFn::custom(std::string name, std::size_t horizon, Rule rule, bool binary,
                          std::function<Dependence(std::size_t)> reads) {
  if (horizon == 0) throw ArgumentError("custom reward: T must be at least 1");
  if (!rule) throw ArgumentError("custom reward: empty rule");
  RewardFn r;
  r.kind_ = RewardKind::custom;
  r.horizon_ = horizon;
  r.name_ = std::move(name);
  r.rule_ = std::move(rule);
  r.binary_ = binary;
  r.reads_ = std::move(reads);
  return r;
}

BitString RewardFn::target_response(BitView x) const {
  if (!target_) throw CapabilityError("reward " + name_ + " has no target predictor");
  return autoregress(*target_, x, horizon_);
}

Bit RewardFn::compare(BitView trajectory, BitView y) const {
  if (y.size() != horizon_) {
    throw ArgumentError("reward " + name_ + ": response length " + std::to_string(y.size()) +
                        " != T = " + std::to_string(horizon_));
  }
  if (kind_ == RewardKind::end_token) return y[horizon_ - 1] == trajectory[horizon_ - 1] ? 1 : 0;
  if (kind_ == RewardKind::zero_one) return y == trajectory ? 1 : 0;
  throw CapabilityError("compare: custom reward " + name_);
}

double RewardFn::operator()(BitView x, BitView y) const {
  if (y.size() != horizon_) {
    throw ArgumentError("reward " + name_ + ": response length " + std::to_string(y.size()) +
                        " != T = " + std::to_string(horizon_));
  }
  if (kind_ == RewardKind::custom) {
    double v = rule_(x, y);
    if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("reward " + name_ + ": value outside [0,1]");
    if (binary_ && v != 0.0 && v != 1.0) throw ArgumentError("reward " + name_ + ": non-binary value");
    return v;
  }
  BitString traj = target_response(x);
  return compare(traj, y);
}

Dependence RewardFn::prompt_dependence(std::size_t prompt_length) const {
  if (target_) return target_->prompt_dependence(prompt_length, horizon_);
  if (reads_) return reads_(prompt_length);
  return Dependence::everything();
}

RewardFn end_token_reward(NextTokenFn target, std::size_t horizon) {
  return RewardFn::end_token(std::move(target), horizon);
}

RewardFn zero_one_reward(NextTokenFn target, std::size_t horizon) {
  return RewardFn::zero_one(std::move(target), horizon);
}

RewardClass::RewardClass(FunctionClass functions, RewardKind kind)
    : functions_(std::move(functions)), kind_(kind) {
  if (kind == RewardKind::custom) throw ArgumentError("induce_reward_class: kind must be induced");
}

RewardFn RewardClass::member(std::uint64_t index) const {
  NextTokenFn f = functions_.member(index);
  return kind_ == RewardKind::end_token ? RewardFn::end_token(std::move(f), horizon())
                                        : RewardFn::zero_one(std::move(f), horizon());
}

RewardClass induce_reward_class(FunctionClass functions, RewardKind kind) {
  return RewardClass(std::move(functions), kind);
}

MarginReport margin_check(const RewardFn& r, const std::vector<BitString>& prompts, double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("margin_check: sigma must be positive");
  const auto responses = all_strings(r.horizon());
  MarginReport report;
  report.binary = r.binary();
  report.holds = true;
  report.holds_non_strict = true;
  std::vector<double> values(responses.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    for (std::size_t k = 0; k < responses.size(); ++k) values[k] = r(prompts[i], responses[k]);
    const double best = *std::ranges::max_element(values);
    double runner_up = -1.0;
    for (double v : values) {
      if (v < best) runner_up = std::max(runner_up, v);
    }
    if (runner_up < 0.0) {
      report.degenerate_prompts.push_back(i);
      continue;
    }
    const double gap = best - runner_up;
    if (!report.worst_gap || gap < *report.worst_gap) {
      report.worst_gap = gap;
      report.worst_prompt = i;
    }
    if (!(gap > sigma)) report.holds = false;
    if (!(gap >= sigma)) report.holds_non_strict = false;
  }
  return report;
}

}  // namespace bitlab

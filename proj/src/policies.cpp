#include "bitlab/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace bitlab {

namespace {

std::size_t draw_index(const std::vector<double>& cumulative, Rng& rng) {
  const double u = rng.uniform01() * cumulative.back();
  auto it = std::ranges::upper_bound(cumulative, u);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

std::vector<double> cumulate(const std::vector<double>& weights) {
  std::vector<double> out(weights.size());
  std::partial_sum(weights.begin(), weights.end(), out.begin());
  return out;
}

void check_weights(const std::vector<double>& weights, const char* where) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError(std::string(where) + ": negative or non-finite weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ArgumentError(std::string(where) + ": weights sum to " + std::to_string(total) + ", not 1");
  }
}

}  // namespace

PromptDistribution PromptDistribution::point(BitString x) { return weighted({std::move(x)}, {1.0}); }

PromptDistribution PromptDistribution::uniform(std::vector<BitString> support) {
  if (support.empty()) throw ArgumentError("PromptDistribution: empty support");
  std::vector<double> weights(support.size(), 1.0 / static_cast<double>(support.size()));
  PromptDistribution P;
  P.support_ = std::move(support);
  P.weights_ = std::move(weights);
  std::set<BitString> seen(P.support_.begin(), P.support_.end());
  if (seen.size() != P.support_.size()) throw ArgumentError("PromptDistribution: repeated prompt");
  P.cumulative_ = cumulate(P.weights_);
  return P;
}

PromptDistribution PromptDistribution::weighted(std::vector<BitString> support,
                                                std::vector<double> weights) {
  if (support.empty()) throw ArgumentError("PromptDistribution: empty support");
  if (support.size() != weights.size()) throw ArgumentError("PromptDistribution: weight count mismatch");
  check_weights(weights, "PromptDistribution");
  std::set<BitString> seen(support.begin(), support.end());
  if (seen.size() != support.size()) throw ArgumentError("PromptDistribution: repeated prompt");
  PromptDistribution P;
  P.support_ = std::move(support);
  P.weights_ = std::move(weights);
  P.cumulative_ = cumulate(P.weights_);
  return P;
}

PromptDistribution PromptDistribution::uniform_cube(std::size_t length) {
  if (length > kMaxLength) throw ResourceError("uniform_cube: length guard exceeded");
  PromptDistribution P;
  P.cube_length_ = length;
  return P;
}

const std::vector<BitString>& PromptDistribution::support() const {
  if (is_cube()) throw CapabilityError("PromptDistribution: the cube has no explicit support");
  return support_;
}

const std::vector<double>& PromptDistribution::weights() const {
  if (is_cube()) throw CapabilityError("PromptDistribution: the cube has no explicit weights");
  return weights_;
}

BitString PromptDistribution::sample(Rng& rng) const {
  if (cube_length_) {
    std::vector<Bit> bits(*cube_length_);
    for (auto& b : bits) b = rng.bit();
    return BitString(std::move(bits));
  }
  if (support_.size() == 1) return support_.front();
  return support_[draw_index(cumulative_, rng)];
}

void PromptDistribution::for_each(const Dependence& dep,
                                  const std::function<void(BitView, double)>& fn) const {
  if (!cube_length_) {
    for (std::size_t j = 0; j < support_.size(); ++j) fn(support_[j], weights_[j]);
    return;
  }
  const std::size_t length = *cube_length_;
  std::vector<std::size_t> positions;
  if (dep.all) {
    positions.resize(length);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
  } else {
    for (std::size_t p : dep.positions) {
      if (p < length) positions.push_back(p);
    }
  }
  const std::size_t k = positions.size();
  if (k >= 63 || (std::uint64_t{1} << k) > kEnumerationBudget) {
    throw ResourceError("PromptDistribution: 2^" + std::to_string(k) +
                        " prompt assignments exceed the enumeration budget");
  }
  const std::uint64_t count = std::uint64_t{1} << k;
  const double w = 1.0 / static_cast<double>(count);
  std::vector<Bit> buffer(length, 0);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (std::size_t i = 0; i < k; ++i) buffer[positions[i]] = static_cast<Bit>((mask >> i) & 1u);
    fn(BitView(std::span<const Bit>(buffer)), w);
  }
}

BitString sample_prompt(const PromptDistribution& P, Rng& rng) { return P.sample(rng); }

struct ResponsePolicy::Impl {
  Kind kind = Kind::uniform;
  std::size_t horizon = 1;
  std::optional<NextTokenFn> f;
  Bit last = 0;
  std::vector<PolicyComponent> components;
  std::vector<double> cumulative;
  std::vector<BitString> prompts;
  std::vector<ResponseDistribution> laws;
  std::vector<std::vector<double>> law_cumulative;

  std::size_t law_index(BitView x) const {
    for (std::size_t j = 0; j < prompts.size(); ++j) {
      if (prompts[j].view() == x) return j;
    }
    throw ArgumentError("table policy: prompt " + x.str() + " has no response law");
  }
};

ResponsePolicy ResponsePolicy::deterministic(NextTokenFn f, std::size_t horizon) {
  if (horizon == 0) throw ArgumentError("deterministic policy: T must be at least 1");
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::deterministic;
  impl->horizon = horizon;
  impl->f = std::move(f);
  return ResponsePolicy(std::move(impl));
}

ResponsePolicy ResponsePolicy::uniform(std::size_t horizon) {
  if (horizon == 0) throw ArgumentError("uniform policy: T must be at least 1");
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::uniform;
  impl->horizon = horizon;
  return ResponsePolicy(std::move(impl));
}

ResponsePolicy ResponsePolicy::uniform_fixed_last(Bit last, std::size_t horizon) {
  if (horizon == 0) throw ArgumentError("uniform_fixed_last policy: T must be at least 1");
  if (last > 1) throw ArgumentError("uniform_fixed_last policy: bit must be 0 or 1");
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::uniform_fixed_last;
  impl->horizon = horizon;
  impl->last = last;
  return ResponsePolicy(std::move(impl));
}

ResponsePolicy ResponsePolicy::mixture(std::vector<PolicyComponent> components) {
  if (components.empty()) throw ArgumentError("mixture policy: no components");
  std::vector<double> weights;
  for (const auto& c : components) {
    weights.push_back(c.weight);
    if (c.policy.horizon() != components.front().policy.horizon()) {
      throw ArgumentError("mixture policy: components disagree on T");
    }
  }
  check_weights(weights, "mixture policy");
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::mixture;
  impl->horizon = components.front().policy.horizon();
  impl->cumulative = cumulate(weights);
  impl->components = std::move(components);
  return ResponsePolicy(std::move(impl));
}

ResponsePolicy ResponsePolicy::table(std::vector<BitString> prompts,
                                     std::vector<ResponseDistribution> laws, std::size_t horizon) {
  if (horizon == 0) throw ArgumentError("table policy: T must be at least 1");
  if (prompts.size() != laws.size()) throw ArgumentError("table policy: law count mismatch");
  auto impl = std::make_shared<Impl>();
  impl->kind = Kind::table;
  impl->horizon = horizon;
  for (auto& law : laws) {
    if (law.empty()) throw ArgumentError("table policy: empty law");
    std::vector<double> weights;
    std::map<BitString, double> merged;
    for (const auto& [y, p] : law) {
      if (y.size() != horizon) throw ArgumentError("table policy: response of wrong length");
      weights.push_back(p);
      merged[y] += p;
    }
    check_weights(weights, "table policy");
    ResponseDistribution tidy;
    for (auto& [y, p] : merged) tidy.push_back({y, p});
    impl->law_cumulative.push_back(cumulate([&] {
      std::vector<double> w;
      for (const auto& wr : tidy) w.push_back(wr.p);
      return w;
    }()));
    law = std::move(tidy);
  }
  impl->prompts = std::move(prompts);
  impl->laws = std::move(laws);
  return ResponsePolicy(std::move(impl));
}

ResponsePolicy::Kind ResponsePolicy::kind() const { return impl_->kind; }
std::size_t ResponsePolicy::horizon() const { return impl_->horizon; }
const NextTokenFn* ResponsePolicy::function() const { return impl_->f ? &*impl_->f : nullptr; }

std::optional<Bit> ResponsePolicy::fixed_last() const {
  if (impl_->kind != Kind::uniform_fixed_last) return std::nullopt;
  return impl_->last;
}

const std::vector<PolicyComponent>& ResponsePolicy::components() const { return impl_->components; }

std::string ResponsePolicy::describe() const {
  switch (impl_->kind) {
    case Kind::deterministic:
      return "deterministic(" + impl_->f->name() + ")";
    case Kind::uniform:
      return "uniform";
    case Kind::uniform_fixed_last:
      return std::string("uniform_fixed_last(") + (impl_->last ? "1" : "0") + ")";
    case Kind::mixture: {
      std::string out = "mixture(";
      for (std::size_t i = 0; i < impl_->components.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(impl_->components[i].weight) + ":" + impl_->components[i].policy.describe();
      }
      return out + ")";
    }
    case Kind::table:
      return "table(" + std::to_string(impl_->prompts.size()) + " prompts)";
  }
  return "?";
}

BitString ResponsePolicy::sample(BitView x, Rng& rng) const {
  const std::size_t T = impl_->horizon;
  switch (impl_->kind) {
    case Kind::deterministic:
      return autoregress(*impl_->f, x, T);
    case Kind::uniform: {
      std::vector<Bit> bits(T);
      for (auto& b : bits) b = rng.bit();
      return BitString(std::move(bits));
    }
    case Kind::uniform_fixed_last: {
      std::vector<Bit> bits(T);
      for (std::size_t t = 0; t + 1 < T; ++t) bits[t] = rng.bit();
      bits[T - 1] = impl_->last;
      return BitString(std::move(bits));
    }
    case Kind::mixture:
      return impl_->components[draw_index(impl_->cumulative, rng)].policy.sample(x, rng);
    case Kind::table: {
      const std::size_t j = impl_->law_index(x);
      return impl_->laws[j][draw_index(impl_->law_cumulative[j], rng)].y;
    }
  }
  throw CapabilityError("sample: unknown policy kind");
}

ResponseDistribution ResponsePolicy::distribution(BitView x, std::uint64_t budget) const {
  const std::size_t T = impl_->horizon;
  auto check = [&](std::size_t bits) {
    if (bits >= 63 || (std::uint64_t{1} << bits) > budget) {
      throw ResourceError("response law over 2^" + std::to_string(bits) + " responses exceeds the budget");
    }
  };
  switch (impl_->kind) {
    case Kind::deterministic:
      return {{autoregress(*impl_->f, x, T), 1.0}};
    case Kind::uniform: {
      check(T);
      const double p = std::ldexp(1.0, -static_cast<int>(T));
      ResponseDistribution out;
      for (auto& y : all_strings(T)) out.push_back({std::move(y), p});
      return out;
    }
    case Kind::uniform_fixed_last: {
      check(T - 1);
      const double p = std::ldexp(1.0, -static_cast<int>(T - 1));
      ResponseDistribution out;
      const std::uint64_t count = std::uint64_t{1} << (T - 1);
      for (std::uint64_t v = 0; v < count; ++v) {
        std::vector<Bit> bits = to_binary(v, T - 1).bits();
        bits.push_back(impl_->last);
        out.push_back({BitString(std::move(bits)), p});
      }
      return out;
    }
    case Kind::mixture: {
      std::map<BitString, double> merged;
      for (const auto& c : impl_->components) {
        for (auto& [y, p] : c.policy.distribution(x, budget)) merged[y] += c.weight * p;
      }
      ResponseDistribution out;
      for (auto& [y, p] : merged) out.push_back({y, p});
      return out;
    }
    case Kind::table:
      return impl_->laws[impl_->law_index(x)];
  }
  throw CapabilityError("distribution: unknown policy kind");
}

Dependence ResponsePolicy::prompt_dependence(std::size_t prompt_length) const {
  switch (impl_->kind) {
    case Kind::deterministic:
      return impl_->f->prompt_dependence(prompt_length, impl_->horizon);
    case Kind::uniform:
    case Kind::uniform_fixed_last:
      return Dependence::none();
    case Kind::mixture: {
      Dependence dep = Dependence::none();
      for (const auto& c : impl_->components) dep.merge(c.policy.prompt_dependence(prompt_length));
      return dep;
    }
    case Kind::table:
      return Dependence::everything();
  }
  return Dependence::everything();
}

BitString sample_response(const ResponsePolicy& policy, BitView x, Rng& rng) {
  return policy.sample(x, rng);
}

double coverage_exact(const ResponsePolicy& policy, const RewardFn& r, BitView x) {
  if (policy.horizon() != r.horizon()) throw ArgumentError("coverage: policy and reward disagree on T");
  const std::size_t T = r.horizon();
  const bool induced = r.kind() != RewardKind::custom;
  switch (policy.kind()) {
    case ResponsePolicy::Kind::deterministic:
      return r(x, autoregress(*policy.function(), x, T)) == 1.0 ? 1.0 : 0.0;
    case ResponsePolicy::Kind::uniform:
      if (r.kind() == RewardKind::end_token) return 0.5;
      if (r.kind() == RewardKind::zero_one) return std::ldexp(1.0, -static_cast<int>(T));
      break;
    case ResponsePolicy::Kind::uniform_fixed_last:
      if (induced) {
        const BitString traj = r.target_response(x);
        if (traj[T - 1] != *policy.fixed_last()) return 0.0;
        return r.kind() == RewardKind::end_token ? 1.0 : std::ldexp(1.0, -static_cast<int>(T - 1));
      }
      break;
    case ResponsePolicy::Kind::mixture: {
      double total = 0.0;
      for (const auto& c : policy.components()) total += c.weight * coverage_exact(c.policy, r, x);
      return total;
    }
    case ResponsePolicy::Kind::table:
      break;
  }
  ResponseDistribution law;
  try {
    law = policy.distribution(x);
  } catch (const ResourceError& e) {
    throw CapabilityError(std::string("coverage_exact: no closed form and ") + e.what());
  }
  double total = 0.0;
  if (induced) {
    const BitString traj = r.target_response(x);
    for (const auto& [y, p] : law) total += r.compare(traj, y) ? p : 0.0;
  } else {
    for (const auto& [y, p] : law) total += r(x, y) == 1.0 ? p : 0.0;
  }
  return total;
}

Estimate coverage_mc(const ResponsePolicy& policy, const RewardFn& r, BitView x, std::uint64_t m,
                     Rng& rng) {
  if (m == 0) throw ArgumentError("coverage_mc: need at least one sample");
  std::uint64_t hits = 0;
  std::optional<BitString> traj;
  if (r.kind() != RewardKind::custom) traj = r.target_response(x);
  for (std::uint64_t i = 0; i < m; ++i) {
    BitString y = policy.sample(x, rng);
    const bool hit = traj ? r.compare(*traj, y) == 1 : r(x, y) == 1.0;
    hits += hit ? 1 : 0;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(m);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(m))};
}

double coverage_constant(const ResponsePolicy& policy, const RewardFn& r, const PromptDistribution& P) {
  double alpha = 1.0;
  P.for_each(dependence_under(P, policy, r), [&](BitView x, double w) {
    if (w > 0.0) alpha = std::min(alpha, coverage_exact(policy, r, x));
  });
  return alpha;
}

LossMarginReport check_loss_margin(const FunctionClass& F, std::size_t target_index,
                                    const ResponsePolicy& sft_policy, const PromptDistribution& P,
                                    std::uint64_t n, std::uint64_t mc, Rng* rng) {
  if (F.size() < 2) throw ArgumentError("check_loss_margin: class needs a competitor");
  if (target_index >= F.size()) throw RangeError("check_loss_margin: target index out of range");
  if (mc > 0 && rng == nullptr) throw ArgumentError("check_loss_margin: Monte Carlo needs an rng");
  const std::size_t T = sft_policy.horizon();
  const auto members = F.members();
  const RewardFn reward = end_token_reward(members[target_index], T);

  LossMarginReport report;
  report.target_index = target_index;
  report.expected_loss.assign(members.size(), 0.0);

  if (mc > 0) {
    report.exact = false;
    double reward_sum = 0.0;
    for (std::uint64_t i = 0; i < mc; ++i) {
      BitString x = P.sample(*rng);
      BitString y = sft_policy.sample(x, *rng);
      for (std::size_t k = 0; k < members.size(); ++k) {
        report.expected_loss[k] += static_cast<double>(teacher_forced_errors(members[k], x, y));
      }
      reward_sum += reward(x, y);
    }
    for (auto& l : report.expected_loss) l /= static_cast<double>(mc);
    report.sft_reward = reward_sum / static_cast<double>(mc);
  } else {
    for (std::size_t k = 0; k < members.size(); ++k) {
      Dependence dep = dependence_under(P, sft_policy);
      if (P.is_cube()) dep.merge(members[k].prompt_dependence(*P.cube_length(), T));
      double total = 0.0;
      P.for_each(dep, [&](BitView x, double w) {
        for (const auto& [y, p] : sft_policy.distribution(x)) {
          total += w * p * static_cast<double>(teacher_forced_errors(members[k], x, y));
        }
      });
      report.expected_loss[k] = total;
    }
    double total = 0.0;
    P.for_each(dependence_under(P, sft_policy, reward), [&](BitView x, double w) {
      const BitString traj = reward.target_response(x);
      for (const auto& [y, p] : sft_policy.distribution(x)) total += w * p * reward.compare(traj, y);
    });
    report.sft_reward = total;
  }

  report.target_loss = report.expected_loss[target_index];
  report.min_other_loss = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (k != target_index) report.min_other_loss = std::min(report.min_other_loss, report.expected_loss[k]);
  }
  report.per_sample_gap = report.min_other_loss - report.target_loss;
  report.summed_gap = report.per_sample_gap * static_cast<double>(n);
  const bool full_reward = std::abs(report.sft_reward - 1.0) <= 1e-12;
  report.holds_per_sample = full_reward && report.per_sample_gap > 0.5;
  report.holds = full_reward && report.summed_gap > 0.5;
  return report;
}

}  // namespace bitlab

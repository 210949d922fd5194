#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bitlab/rewards.hpp"
#include "bitlab/rng.hpp"

namespace bitlab {

/// Finite-support prompt distribution P_X, or the uniform law on Σ^L.
///
/// The cube is kept implicit: expectations over it enumerate only the
/// coordinates a computation declares it reads.
class PromptDistribution {
 public:
  static PromptDistribution point(BitString x);
  static PromptDistribution uniform(std::vector<BitString> support);
  /// Weights must be non-negative and sum to 1 within 1e-12; support distinct.
  static PromptDistribution weighted(std::vector<BitString> support, std::vector<double> weights);
  static PromptDistribution uniform_cube(std::size_t length);

  bool is_cube() const { return cube_length_.has_value(); }
  std::optional<std::size_t> cube_length() const { return cube_length_; }
  /// Explicit support; throws CapabilityError for the cube.
  const std::vector<BitString>& support() const;
  const std::vector<double>& weights() const;

  BitString sample(Rng& rng) const;

  /// Visits a weighted prompt set on which every quantity that depends only on
  /// `dep` has the same expectation as under P. Coordinates outside `dep` are
  /// set to 0. Throws ResourceError when the set exceeds the budget.
  void for_each(const Dependence& dep, const std::function<void(BitView, double)>& fn) const;

 private:
  PromptDistribution() = default;

  std::vector<BitString> support_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  std::optional<std::size_t> cube_length_;
};

BitString sample_prompt(const PromptDistribution& P, Rng& rng);

/// Union of the prompt dependences of several parts under P. Explicit
/// supports are always enumerated whole, so this is only informative for cubes.
template <class... Parts>
Dependence dependence_under(const PromptDistribution& P, const Parts&... parts) {
  if (!P.is_cube()) return Dependence::everything();
  Dependence dep = Dependence::none();
  (dep.merge(parts.prompt_dependence(*P.cube_length())), ...);
  return dep;
}

struct WeightedResponse {
  BitString y;
  double p = 0.0;
};
using ResponseDistribution = std::vector<WeightedResponse>;

struct PolicyComponent;

/// Conditional response law π(y|x) over Σ^T.
class ResponsePolicy {
 public:
  enum class Kind { deterministic, uniform, uniform_fixed_last, mixture, table };

  /// Mass 1 on f^AR(x).
  static ResponsePolicy deterministic(NextTokenFn f, std::size_t horizon);
  static ResponsePolicy uniform(std::size_t horizon);
  /// Uniform on the first T-1 symbols, last symbol fixed.
  static ResponsePolicy uniform_fixed_last(Bit last, std::size_t horizon);
  static ResponsePolicy mixture(std::vector<PolicyComponent> components);
  /// Prompt-dependent law; `laws[j]` applies to prompts[j]. Other prompts throw ArgumentError.
  static ResponsePolicy table(std::vector<BitString> prompts, std::vector<ResponseDistribution> laws,
                              std::size_t horizon);

  Kind kind() const;
  std::size_t horizon() const;
  std::string describe() const;
  const NextTokenFn* function() const;
  std::optional<Bit> fixed_last() const;
  const std::vector<PolicyComponent>& components() const;

  BitString sample(BitView x, Rng& rng) const;
  /// Exact law at x with duplicate responses merged, in increasing response order.
  ResponseDistribution distribution(BitView x, std::uint64_t budget = kEnumerationBudget) const;
  Dependence prompt_dependence(std::size_t prompt_length) const;

 private:
  struct Impl;
  explicit ResponsePolicy(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

struct PolicyComponent {
  double weight = 0.0;
  ResponsePolicy policy;
};

BitString sample_response(const ResponsePolicy& policy, BitView x, Rng& rng);

/// P_{y~π(.|x)}(r(x,y) = 1). Closed forms for built-in kinds, enumeration
/// otherwise; throws CapabilityError when neither applies.
double coverage_exact(const ResponsePolicy& policy, const RewardFn& r, BitView x);
/// Mean of 1{r(x,y)=1} over m draws, binomial SE.
Estimate coverage_mc(const ResponsePolicy& policy, const RewardFn& r, BitView x, std::uint64_t m,
                     Rng& rng);

/// α = min over the support of the exact coverage.
double coverage_constant(const ResponsePolicy& policy, const RewardFn& r, const PromptDistribution& P);

struct LossMarginReport {
  std::vector<double> expected_loss;  // per member, per sample
  std::size_t target_index = 0;
  double target_loss = 0.0;
  double min_other_loss = 0.0;
  double per_sample_gap = 0.0;
  double summed_gap = 0.0;  // per_sample_gap * n
  double sft_reward = 0.0;  // expected end-token reward of π_SFT
  bool holds_per_sample = false;
  bool holds = false;  // sft_reward == 1 and summed_gap > 1/2
  bool exact = true;
};

/// Checks the margin between the target's expected teacher-forced loss and
/// the best competitor's, under P x π_SFT. Exact by default; with mc > 0 the
/// expectations are estimated from mc draws.
LossMarginReport check_loss_margin(const FunctionClass& F, std::size_t target_index,
                                    const ResponsePolicy& sft_policy, const PromptDistribution& P,
                                    std::uint64_t n, std::uint64_t mc = 0, Rng* rng = nullptr);

}  // namespace bitlab

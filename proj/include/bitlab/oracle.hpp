#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bitlab/policies.hpp"

namespace bitlab {

/// Binary-valued maps tabulated on a finite point panel.
class BinaryBehaviorClass {
 public:
  /// table[i][p] is the value of function i at point p.
  BinaryBehaviorClass(std::vector<std::string> names, std::vector<std::string> points,
                      std::vector<std::vector<Bit>> table);

  std::size_t function_count() const { return names_.size(); }
  std::size_t point_count() const { return points_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::string>& points() const { return points_; }
  Bit value(std::size_t function, std::size_t point) const { return table_[function][point]; }

 private:
  std::vector<std::string> names_;
  std::vector<std::string> points_;
  std::vector<std::vector<Bit>> table_;
};

/// f(s) on each panel string.
BinaryBehaviorClass function_behaviors(const FunctionClass& F, const std::vector<BitString>& panel);
/// f^AR(x)[-1] on each prompt.
BinaryBehaviorClass end_token_behaviors(const FunctionClass& F, const std::vector<BitString>& prompts);
/// r(x, y) on each (x, y) pair; points are labelled "x|y".
BinaryBehaviorClass reward_behaviors(const RewardClass& R,
                                     const std::vector<std::pair<BitString, BitString>>& panel);

/// Every string of length lo..hi, shorter lengths first.
std::vector<BitString> strings_of_lengths(std::size_t lo, std::size_t hi);
/// Σ^L x Σ^T.
std::vector<std::pair<BitString, BitString>> prompt_response_panel(std::size_t prompt_length,
                                                                   std::size_t horizon);

struct ShatterCertificate {
  bool shattered = false;
  std::vector<std::size_t> points;
  std::map<std::string, std::string> witnesses;  // labeling -> function name
  std::vector<std::string> missing;              // unrealised labelings

  std::string to_json() const;
};

/// Throws ResourceError when 2^|points| exceeds the budget, RangeError on a bad index.
bool shatter_check(const BinaryBehaviorClass& C, const std::vector<std::size_t>& points);
ShatterCertificate shatter_certificate(const BinaryBehaviorClass& C,
                                       const std::vector<std::size_t>& points);

struct VcResult {
  std::size_t dimension = 0;
  std::vector<std::size_t> witness;  // a shattered set of that size
};

/// Largest shattered subset of the panel, searched up to `cap` points.
VcResult vc_search(const BinaryBehaviorClass& C, std::size_t cap = 62);
std::size_t vc_dimension(const BinaryBehaviorClass& C, std::size_t cap = 62);

/// Number of distinct behaviour vectors on the given points.
std::uint64_t growth_function(const BinaryBehaviorClass& C, const std::vector<std::size_t>& points);

/// KL(Ber(a) || Ber(b)) in nats; 0 log 0 = 0; +inf when b is 0 or 1 and a != b.
double kl_bernoulli(double a, double b);
/// ln(2/δ) + 4 ln(n+1) + |ln(p/(1-p))|.
double delta_term(double delta, double p, std::uint64_t n);
/// min over r copies of Bin(n, p) / n.
double sample_min_binomial(std::uint64_t copies, std::uint64_t n, double p, Rng& rng);

/// inf over R of P_{x~P, y~π0}(r(x,y) != r_*(x,y)), by exact enumeration.
double compute_kappa(const RewardClass& R, const RewardFn& truth, const PromptDistribution& P,
                     const ResponsePolicy& base);
double compute_kappa(std::span<const RewardFn> R, const RewardFn& truth, const PromptDistribution& P,
                     const ResponsePolicy& base);
/// Monte Carlo version: every member is scored on the same m draws.
Estimate compute_kappa_mc(std::span<const RewardFn> R, const RewardFn& truth,
                          const PromptDistribution& P, const ResponsePolicy& base, std::uint64_t m,
                          Rng& rng);

/// sqrt((vc + ln(1/δ)) / n).
double bound_H(std::uint64_t n, double vc, double delta);

// Risk overlays (1 - reward), natural logs, leading terms without universal constants.

/// log(n) (ln|F| + ln(1/δ)) / (-ln(1-α) n) + 1/n.
double finite_bon_risk(std::uint64_t n, double class_size, double alpha, double delta);
/// log(n) (VC + ln(1/δ)) / (-ln(1-α) n) + 1/n.
double vc_bon_risk(std::uint64_t n, double vc, double alpha, double delta);
/// (κ + H) (log_{1-α}((κ + H) / -ln(1-α)) - 1/ln(1-α)).
double agnostic_bon_risk(double kappa, double H, double alpha);
/// The H -> 0 limit of agnostic_bon_risk.
double agnostic_bon_risk_limit(double kappa, double alpha);
/// log(T) (VC + ln(1/δ)) / n.
double realizable_sft_risk(std::uint64_t n, std::size_t horizon, double vc, double delta);
/// T sqrt(ln(|F|/δ) / n).
double noisy_sft_risk(std::uint64_t n, std::size_t horizon, double class_size, double delta);

/// 1 - risk clipped to [0, 1].
double reward_overlay(double risk);

}  // namespace bitlab

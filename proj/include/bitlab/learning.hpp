#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "bitlab/policies.hpp"

namespace bitlab {

struct RewardRecord {
  BitString x;
  BitString y;
  Bit r = 0;
};

struct SftRecord {
  BitString x;
  BitString y;
};

/// (x, y, r) triples sharing one response length. Horizon 0 means "set by the first record".
class RewardDataset {
 public:
  explicit RewardDataset(std::size_t horizon = 0) : horizon_(horizon) {}
  void add(BitString x, BitString y, Bit r);
  const std::vector<RewardRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t horizon() const { return horizon_; }

 private:
  std::size_t horizon_;
  std::vector<RewardRecord> records_;
};

class SftDataset {
 public:
  explicit SftDataset(std::size_t horizon = 0) : horizon_(horizon) {}
  void add(BitString x, BitString y);
  const std::vector<SftRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t horizon() const { return horizon_; }

 private:
  std::size_t horizon_;
  std::vector<SftRecord> records_;
};

// JSON lines: {"x":"..","y":"..","r":0|1} and {"x":"..","y":".."}.
void write_jsonl(const RewardDataset& data, const std::filesystem::path& path);
void write_jsonl(const SftDataset& data, const std::filesystem::path& path);
RewardDataset read_reward_jsonl(const std::filesystem::path& path);
SftDataset read_sft_jsonl(const std::filesystem::path& path);

/// n draws of x ~ P, y ~ π0(.|x), labelled r(x, y). Throws ArgumentError when n == 0.
RewardDataset collect_reward_data(const PromptDistribution& P, const ResponsePolicy& base,
                                  const RewardFn& r, std::uint64_t n, Rng& rng);
SftDataset collect_sft_data(const PromptDistribution& P, const ResponsePolicy& sft_policy,
                            std::uint64_t n, Rng& rng);

/// Σ_i 1{r(x_i, y_i) != r_i}.
std::uint64_t empirical_reward_loss(const RewardFn& r, const RewardDataset& data);
/// Teacher-forced next-token mistakes summed over records and positions.
std::uint64_t ntp_loss(const NextTokenFn& f, const SftDataset& data);

enum class ErmSearch {
  automatic,    // factorised over prompts for table classes, exhaustive otherwise
  exhaustive,
};

struct RewardFit {
  std::uint64_t index = 0;
  std::uint64_t loss = 0;
  std::uint64_t minimizers = 0;  // saturates at 2^63
  RewardFn reward;
};

struct NtpFit {
  std::uint64_t index = 0;
  std::uint64_t loss = 0;
  std::uint64_t minimizers = 0;
  NextTokenFn f;
};

/// Empirical risk minimiser over R with ties broken uniformly at random.
RewardFit fit_reward_erm(const RewardClass& R, const RewardDataset& data, Rng& rng,
                         ErmSearch search = ErmSearch::automatic);
NtpFit fit_ntp_erm(const FunctionClass& F, const SftDataset& data, Rng& rng,
                   ErmSearch search = ErmSearch::automatic);

/// Losses of every member, in class order. Throws ResourceError above the budget.
std::vector<std::uint64_t> reward_losses(const RewardClass& R, const RewardDataset& data);
std::vector<std::uint64_t> ntp_losses(const FunctionClass& F, const SftDataset& data);

/// One of N draws from π0(.|x) maximising the verifier, uniform among maximisers.
BitString bon_select(const RewardFn& verifier, const ResponsePolicy& base, BitView x,
                     std::uint64_t N, Rng& rng);

/// The Best-of-N policy as a response law.
class BonPolicy {
 public:
  BonPolicy(RewardFn verifier, ResponsePolicy base, std::uint64_t N);

  std::size_t horizon() const { return base_.horizon(); }
  std::uint64_t N() const { return N_; }
  const RewardFn& verifier() const { return verifier_; }
  const ResponsePolicy& base() const { return base_; }

  BitString sample(BitView x, Rng& rng) const { return bon_select(verifier_, base_, x, N_, rng); }
  /// Exact law: the maximal verifier level v is selected with probability
  /// F(v)^N - F(v-)^N, and within a level the response follows π0.
  ResponseDistribution distribution(BitView x, std::uint64_t budget = kEnumerationBudget) const;
  Dependence prompt_dependence(std::size_t prompt_length) const;

 private:
  RewardFn verifier_;
  ResponsePolicy base_;
  std::uint64_t N_;
};

/// max(1, ceil(-ln n / ln(1 - α))); α = 1 gives 1.
std::uint64_t choose_N_realizable(std::uint64_t n, double alpha);

struct NChoice {
  std::uint64_t N = 1;
  double raw = 0.0;  // unrounded value, NaN when degenerate
  bool degenerate = false;
};

/// N = log_{1-α}((κ + H) / -ln(1-α)) with H = sqrt((vc + ln(1/δ)) / n), rounded up, at least 1.
NChoice choose_N_agnostic(std::uint64_t n, double alpha, double kappa, double vc, double delta);
NChoice choose_N_agnostic_from_H(double alpha, double kappa, double H);

}  // namespace bitlab

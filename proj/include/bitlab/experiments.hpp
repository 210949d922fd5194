#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bitlab/learning.hpp"
#include "bitlab/oracle.hpp"

namespace bitlab {

template <class S>
concept ResponseSampler = requires(const S& s, BitView x, Rng& rng, std::size_t length) {
  { s.sample(x, rng) } -> std::convertible_to<BitString>;
  { s.distribution(x) } -> std::convertible_to<ResponseDistribution>;
  { s.prompt_dependence(length) } -> std::convertible_to<Dependence>;
  { s.horizon() } -> std::convertible_to<std::size_t>;
};

/// E_{x~P} r(x, f^AR(x)).
double expected_reward_exact(const NextTokenFn& f, const PromptDistribution& P, const RewardFn& r);

/// E_{x~P} E_{y~π(.|x)} r(x, y), enumerating the prompt coordinates either side reads.
template <ResponseSampler Policy>
double expected_reward_exact(const Policy& policy, const PromptDistribution& P, const RewardFn& r) {
  if (policy.horizon() != r.horizon()) throw ArgumentError("expected_reward_exact: T mismatch");
  double total = 0.0;
  P.for_each(dependence_under(P, policy, r), [&](BitView x, double w) {
    const ResponseDistribution law = policy.distribution(x);
    if (r.kind() == RewardKind::custom) {
      for (const auto& [y, p] : law) total += w * p * r(x, y);
      return;
    }
    const BitString traj = r.target_response(x);
    for (const auto& [y, p] : law) total += w * p * r.compare(traj, y);
  });
  return total;
}

/// Mean of r over m prompt-response draws with its standard error.
template <ResponseSampler Policy>
Estimate estimate_reward_mc(const Policy& policy, const PromptDistribution& P, const RewardFn& r,
                            std::uint64_t m, Rng& rng) {
  if (m == 0) throw ArgumentError("estimate_reward_mc: m must be at least 1");
  double sum = 0.0;
  double sq = 0.0;
  for (std::uint64_t i = 0; i < m; ++i) {
    const BitString x = P.sample(rng);
    const double v = r(x, policy.sample(x, rng));
    sum += v;
    sq += v * v;
  }
  const double mm = static_cast<double>(m);
  const double mean = sum / mm;
  const double var = std::max(0.0, sq / mm - mean * mean);
  return {mean, std::sqrt(var / mm)};
}

struct TrialRecord {
  std::string scenario;
  std::string method;  // sft | bon | oracle-bon
  std::optional<std::uint64_t> n;
  std::size_t T = 0;
  std::optional<std::uint64_t> N;
  std::optional<double> alpha;
  std::optional<std::uint64_t> m_or_D;
  std::uint64_t trial = 0;
  double reward_mean = 0.0;
  double reward_se = 0.0;
  std::string fitted_member;
  std::optional<double> bound_overlay;
  std::uint64_t seed = 0;
  // Not written to CSV.
  std::uint64_t cell = 0;
  std::uint64_t minimizers = 0;
  std::uint64_t fitted_index = 0;
};

/// How a BoN policy's reward is measured.
struct Evaluation {
  enum class Mode { automatic, exact, monte_carlo };
  Mode mode = Mode::automatic;  // automatic: exact when enumerable, otherwise Monte Carlo
  std::uint64_t mc_samples = 100000;
};

/// Rule producing N from the sample size.
struct NRule {
  enum class Kind { fixed, realizable, agnostic };
  Kind kind = Kind::fixed;
  std::uint64_t N = 1;
  double alpha = 0.5;
  double kappa = 0.0;
  double vc = 0.0;
  double delta = 0.1;

  static NRule fixed(std::uint64_t N);
  static NRule realizable(double alpha);
  static NRule agnostic(double alpha, double kappa, double vc, double delta);
  std::uint64_t choose(std::uint64_t n) const;
};

/// Exact expected reward per fitted member, shared by the trials of one cell.
using RewardCache = std::map<std::pair<std::uint64_t, std::uint64_t>, double>;

/// collect_sft_data -> fit_ntp_erm -> exact reward of f̂^AR.
TrialRecord run_sft_trial(const FunctionClass& F, const PromptDistribution& P,
                          const ResponsePolicy& sft_policy, const RewardFn& r, std::uint64_t n,
                          Rng& rng, RewardCache* cache = nullptr);

/// collect_reward_data -> fit_reward_erm -> reward of BoN with N = rule(n).
/// With `oracle`, fitting is skipped and the true reward is the verifier.
TrialRecord run_bon_trial(const RewardClass& R, const PromptDistribution& P, const ResponsePolicy& base,
                          const RewardFn& r, std::uint64_t n, const NRule& rule, const Evaluation& eval,
                          Rng& rng, bool oracle = false, RewardCache* cache = nullptr);

struct ExperimentConfig {
  std::string scenario;
  std::vector<std::uint64_t> n_grid;
  std::vector<std::uint64_t> T_grid;
  std::vector<std::uint64_t> N_grid;
  std::vector<std::uint64_t> size_grid;  // m or D
  std::uint64_t trials = 400;
  std::uint64_t mc_samples = 100000;
  std::uint64_t master_seed = 0;
  std::string output_path;
  double delta = 0.1;
  nlohmann::json options = nlohmann::json::object();

  /// Throws ArgumentError on unknown scenarios, empty grids or zero trials.
  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Scenario identifiers accepted by run_sweep.
const std::vector<std::string>& scenario_names();
/// Canonical name for a scenario or one of its short aliases (t4 ... c2).
std::string resolve_scenario(const std::string& name);
/// Default grids and options for a scenario.
ExperimentConfig default_config(const std::string& scenario);

struct CellSummary {
  nlohmann::json coords;
  double mean = 0.0;
  double se = 0.0;
  std::optional<double> overlay;
  std::optional<bool> pass;
  nlohmann::json extra = nlohmann::json::object();
};

struct SweepResult {
  std::string scenario;
  std::vector<TrialRecord> rows;
  std::vector<CellSummary> cells;
  std::vector<std::string> flags;  // warnings such as out-of-regime parameters
  nlohmann::json diagnostics = nlohmann::json::object();
};

/// Runs every (cell, trial). Output is a pure function of the config.
SweepResult run_sweep(const ExperimentConfig& config);

/// Shortest round-trip decimal for a double.
std::string format_double(double v);
std::string csv_header();
std::string csv_row(const TrialRecord& row);
void write_csv(const std::vector<TrialRecord>& rows, const std::filesystem::path& path);
std::string summary_json(const SweepResult& result, const ExperimentConfig& config);
void write_summary_json(const SweepResult& result, const ExperimentConfig& config,
                        const std::filesystem::path& path);
/// FNV-1a of the canonical config JSON, as 16 hex digits.
std::string config_digest(const ExperimentConfig& config);

/// Mean and standard error of the trial rewards of each cell, in cell order.
std::vector<CellSummary> summarize_cells(const std::vector<TrialRecord>& rows);

}  // namespace bitlab

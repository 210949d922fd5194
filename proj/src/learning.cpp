#include "bitlab/learning.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "bitlab/oracle.hpp"

namespace bitlab {

namespace {

using nlohmann::json;

void check_response(std::size_t& horizon, const BitString& y, const char* where) {
  if (y.empty()) throw ArgumentError(std::string(where) + ": empty response");
  if (horizon == 0) horizon = y.size();
  if (y.size() != horizon) {
    throw ArgumentError(std::string(where) + ": response length " + std::to_string(y.size()) +
                        " != T = " + std::to_string(horizon));
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

template <class Fn>
void read_lines(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ArgumentError& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::uint64_t saturating_pow2(std::size_t k) {
  return k >= 63 ? (std::uint64_t{1} << 63) : (std::uint64_t{1} << k);
}

template <class T>
std::uint64_t pick_minimizer(const std::vector<T>& losses, Rng& rng, std::uint64_t& count) {
  const T best = *std::ranges::min_element(losses);
  std::vector<std::uint64_t> ties;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] == best) ties.push_back(i);
  }
  count = ties.size();
  return ties[rng.uniform_index(ties.size())];
}

// Table members predict their prompt's label at every step, so the loss
// splits into one two-way choice per free prompt.
struct Factorised {
  std::uint64_t index = 0;
  std::uint64_t loss = 0;
  std::uint64_t minimizers = 1;
};

Factorised minimise_table(const TableLayout& layout,
                          const std::vector<std::array<std::uint64_t, 2>>& cost,
                          std::uint64_t fixed_cost, Rng& rng) {
  Factorised out;
  out.loss = fixed_cost;
  std::size_t ties = 0;
  std::size_t k = 0;
  for (std::size_t j = 0; j < layout.prompts.size(); ++j) {
    if (!layout.pinned.empty() && layout.pinned[j]) {
      out.loss += cost[j][*layout.pinned[j]];
      continue;
    }
    Bit choice;
    if (cost[j][0] == cost[j][1]) {
      choice = rng.bit();
      ++ties;
    } else {
      choice = cost[j][1] < cost[j][0] ? 1 : 0;
    }
    out.loss += cost[j][choice];
    out.index |= static_cast<std::uint64_t>(choice) << k;
    ++k;
  }
  out.minimizers = saturating_pow2(ties);
  return out;
}

// The split holds when every prompt already fixes its table row, i.e. no
// record's prompt is shorter than the table prompts.
template <class Records>
bool factorises(const TableLayout* layout, const Records& records) {
  if (!layout) return false;
  const std::size_t L = layout->prompts.front().size();
  return std::ranges::all_of(records, [L](const auto& rec) { return rec.x.size() >= L; });
}

double ceil_guarded(double v) { return std::ceil(v - 1e-12 * std::max(1.0, std::abs(v))); }

}  // namespace

void RewardDataset::add(BitString x, BitString y, Bit r) {
  check_response(horizon_, y, "RewardDataset");
  if (r > 1) throw ArgumentError("RewardDataset: reward must be 0 or 1");
  records_.push_back({std::move(x), std::move(y), r});
}

void SftDataset::add(BitString x, BitString y) {
  check_response(horizon_, y, "SftDataset");
  records_.push_back({std::move(x), std::move(y)});
}

void write_jsonl(const RewardDataset& data, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& rec : data.records()) {
    out << json{{"x", rec.x.str()}, {"y", rec.y.str()}, {"r", static_cast<int>(rec.r)}}.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_jsonl(const SftDataset& data, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& rec : data.records()) {
    out << json{{"x", rec.x.str()}, {"y", rec.y.str()}}.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

RewardDataset read_reward_jsonl(const std::filesystem::path& path) {
  RewardDataset data;
  read_lines(path, [&](const json& j) {
    const int r = j.at("r").get<int>();
    if (r != 0 && r != 1) throw ArgumentError("reward must be 0 or 1");
    data.add(BitString::parse(j.at("x").get<std::string>()),
             BitString::parse(j.at("y").get<std::string>()), static_cast<Bit>(r));
  });
  return data;
}

SftDataset read_sft_jsonl(const std::filesystem::path& path) {
  SftDataset data;
  read_lines(path, [&](const json& j) {
    data.add(BitString::parse(j.at("x").get<std::string>()),
             BitString::parse(j.at("y").get<std::string>()));
  });
  return data;
}

RewardDataset collect_reward_data(const PromptDistribution& P, const ResponsePolicy& base,
                                  const RewardFn& r, std::uint64_t n, Rng& rng) {
  if (n == 0) throw ArgumentError("collect_reward_data: n must be at least 1");
  if (base.horizon() != r.horizon()) throw ArgumentError("collect_reward_data: T mismatch");
  RewardDataset data(r.horizon());
  for (std::uint64_t i = 0; i < n; ++i) {
    BitString x = P.sample(rng);
    BitString y = base.sample(x, rng);
    const double v = r(x, y);
    if (v != 0.0 && v != 1.0) throw ArgumentError("collect_reward_data: reward is not binary");
    data.add(std::move(x), std::move(y), static_cast<Bit>(v));
  }
  return data;
}

SftDataset collect_sft_data(const PromptDistribution& P, const ResponsePolicy& sft_policy,
                            std::uint64_t n, Rng& rng) {
  if (n == 0) throw ArgumentError("collect_sft_data: n must be at least 1");
  SftDataset data(sft_policy.horizon());
  for (std::uint64_t i = 0; i < n; ++i) {
    BitString x = P.sample(rng);
    BitString y = sft_policy.sample(x, rng);
    data.add(std::move(x), std::move(y));
  }
  return data;
}

std::uint64_t empirical_reward_loss(const RewardFn& r, const RewardDataset& data) {
  std::uint64_t loss = 0;
  for (const auto& rec : data.records()) {
    const double v = r.kind() == RewardKind::custom ? r(rec.x, rec.y)
                                                    : r.compare(r.target_response(rec.x), rec.y);
    if (v != static_cast<double>(rec.r)) ++loss;
  }
  return loss;
}

std::uint64_t ntp_loss(const NextTokenFn& f, const SftDataset& data) {
  std::uint64_t loss = 0;
  for (const auto& rec : data.records()) loss += teacher_forced_errors(f, rec.x, rec.y);
  return loss;
}

std::vector<std::uint64_t> reward_losses(const RewardClass& R, const RewardDataset& data) {
  if (R.size() > kEnumerationBudget) throw ResourceError("reward_losses: class exceeds the budget");
  std::vector<std::uint64_t> out(R.size());
  for (std::uint64_t i = 0; i < R.size(); ++i) out[i] = empirical_reward_loss(R.member(i), data);
  return out;
}

std::vector<std::uint64_t> ntp_losses(const FunctionClass& F, const SftDataset& data) {
  if (F.size() > kEnumerationBudget) throw ResourceError("ntp_losses: class exceeds the budget");
  std::vector<std::uint64_t> out(F.size());
  for (std::uint64_t i = 0; i < F.size(); ++i) out[i] = ntp_loss(F.member(i), data);
  return out;
}

RewardFit fit_reward_erm(const RewardClass& R, const RewardDataset& data, Rng& rng, ErmSearch search) {
  if (data.size() > 0 && data.horizon() != R.horizon()) {
    throw ArgumentError("fit_reward_erm: dataset and class disagree on T");
  }
  const TableLayout* layout = R.functions().table_layout();
  if (search == ErmSearch::automatic && factorises(layout, data.records())) {
    const std::size_t T = R.horizon();
    std::vector<std::array<std::uint64_t, 2>> cost(layout->prompts.size(), {0, 0});
    std::uint64_t fixed = 0;
    for (const auto& rec : data.records()) {
      auto value = [&](Bit label) -> Bit {
        if (R.kind() == RewardKind::end_token) return rec.y[T - 1] == label ? 1 : 0;
        return std::ranges::all_of(rec.y, [label](Bit b) { return b == label; }) ? 1 : 0;
      };
      auto j = layout->prompt_of(rec.x);
      if (!j) {
        fixed += value(0) != rec.r ? 1 : 0;
        continue;
      }
      for (Bit b : {Bit{0}, Bit{1}}) cost[*j][b] += value(b) != rec.r ? 1 : 0;
    }
    Factorised best = minimise_table(*layout, cost, fixed, rng);
    return {best.index, best.loss, best.minimizers, R.member(best.index)};
  }
  auto losses = reward_losses(R, data);
  std::uint64_t count = 0;
  const std::uint64_t index = pick_minimizer(losses, rng, count);
  return {index, losses[index], count, R.member(index)};
}

NtpFit fit_ntp_erm(const FunctionClass& F, const SftDataset& data, Rng& rng, ErmSearch search) {
  const TableLayout* layout = F.table_layout();
  if (search == ErmSearch::automatic && factorises(layout, data.records())) {
    std::vector<std::array<std::uint64_t, 2>> cost(layout->prompts.size(), {0, 0});
    std::uint64_t fixed = 0;
    for (const auto& rec : data.records()) {
      const auto ones = static_cast<std::uint64_t>(std::ranges::count(rec.y, Bit{1}));
      const std::uint64_t zeros = rec.y.size() - ones;
      auto j = layout->prompt_of(rec.x);
      if (!j) {
        fixed += ones;
        continue;
      }
      cost[*j][0] += ones;
      cost[*j][1] += zeros;
    }
    Factorised best = minimise_table(*layout, cost, fixed, rng);
    return {best.index, best.loss, best.minimizers, F.member(best.index)};
  }
  auto losses = ntp_losses(F, data);
  std::uint64_t count = 0;
  const std::uint64_t index = pick_minimizer(losses, rng, count);
  return {index, losses[index], count, F.member(index)};
}

BitString bon_select(const RewardFn& verifier, const ResponsePolicy& base, BitView x,
                     std::uint64_t N, Rng& rng) {
  if (N == 0) throw ArgumentError("bon_select: N must be at least 1");
  if (verifier.horizon() != base.horizon()) throw ArgumentError("bon_select: T mismatch");
  std::optional<BitString> traj;
  if (verifier.kind() != RewardKind::custom) traj = verifier.target_response(x);
  std::vector<BitString> draws;
  std::vector<double> scores;
  draws.reserve(N);
  scores.reserve(N);
  for (std::uint64_t i = 0; i < N; ++i) {
    draws.push_back(base.sample(x, rng));
    scores.push_back(traj ? verifier.compare(*traj, draws.back()) : verifier(x, draws.back()));
  }
  const double best = *std::ranges::max_element(scores);
  std::vector<std::size_t> ties;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] == best) ties.push_back(i);
  }
  return draws[ties[ties.size() == 1 ? 0 : rng.uniform_index(ties.size())]];
}

BonPolicy::BonPolicy(RewardFn verifier, ResponsePolicy base, std::uint64_t N)
    : verifier_(std::move(verifier)), base_(std::move(base)), N_(N) {
  if (N_ == 0) throw ArgumentError("BonPolicy: N must be at least 1");
  if (verifier_.horizon() != base_.horizon()) throw ArgumentError("BonPolicy: T mismatch");
}

ResponseDistribution BonPolicy::distribution(BitView x, std::uint64_t budget) const {
  ResponseDistribution law = base_.distribution(x, budget);
  std::optional<BitString> traj;
  if (verifier_.kind() != RewardKind::custom) traj = verifier_.target_response(x);
  std::vector<double> score(law.size());
  std::map<double, double> level_mass;
  for (std::size_t i = 0; i < law.size(); ++i) {
    score[i] = traj ? verifier_.compare(*traj, law[i].y) : verifier_(x, law[i].y);
    level_mass[score[i]] += law[i].p;
  }
  const double n = static_cast<double>(N_);
  std::map<double, double> level_pick;
  double below = 0.0;
  for (const auto& [v, mass] : level_mass) {
    const double upto = std::min(1.0, below + mass);
    level_pick[v] = std::pow(upto, n) - std::pow(below, n);
    below = upto;
  }
  ResponseDistribution out;
  out.reserve(law.size());
  for (std::size_t i = 0; i < law.size(); ++i) {
    const double mass = level_mass[score[i]];
    const double p = mass > 0.0 ? law[i].p / mass * level_pick[score[i]] : 0.0;
    out.push_back({std::move(law[i].y), p});
  }
  return out;
}

Dependence BonPolicy::prompt_dependence(std::size_t prompt_length) const {
  Dependence dep = base_.prompt_dependence(prompt_length);
  dep.merge(verifier_.prompt_dependence(prompt_length));
  return dep;
}

std::uint64_t choose_N_realizable(std::uint64_t n, double alpha) {
  if (n == 0) throw ArgumentError("choose_N_realizable: n must be at least 1");
  if (!(alpha > 0.0) || alpha > 1.0) throw ArgumentError("choose_N_realizable: α must lie in (0, 1]");
  if (alpha == 1.0) return 1;
  const double raw = -std::log(static_cast<double>(n)) / std::log1p(-alpha);
  return static_cast<std::uint64_t>(std::max(1.0, ceil_guarded(raw)));
}

NChoice choose_N_agnostic_from_H(double alpha, double kappa, double H) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("choose_N_agnostic: α must lie in (0, 1)");
  if (!(kappa >= 0.0) || !(H >= 0.0)) throw ArgumentError("choose_N_agnostic: κ and H must be non-negative");
  const double log_q = std::log1p(-alpha);
  const double arg = (-kappa - H) / log_q;
  NChoice out;
  if (!(arg > 0.0) || !std::isfinite(arg)) {
    out.degenerate = true;
    out.raw = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.raw = std::log(arg) / log_q;
  out.N = static_cast<std::uint64_t>(std::max(1.0, ceil_guarded(out.raw)));
  return out;
}

NChoice choose_N_agnostic(std::uint64_t n, double alpha, double kappa, double vc, double delta) {
  return choose_N_agnostic_from_H(alpha, kappa, bound_H(n, vc, delta));
}

}  // namespace bitlab

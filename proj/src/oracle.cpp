#include "bitlab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

namespace bitlab {

BinaryBehaviorClass::BinaryBehaviorClass(std::vector<std::string> names, std::vector<std::string> points,
                                         std::vector<std::vector<Bit>> table)
    : names_(std::move(names)), points_(std::move(points)), table_(std::move(table)) {
  if (names_.empty()) throw ArgumentError("BinaryBehaviorClass: no functions");
  if (table_.size() != names_.size()) throw ArgumentError("BinaryBehaviorClass: row count mismatch");
  for (const auto& row : table_) {
    if (row.size() != points_.size()) throw ArgumentError("BinaryBehaviorClass: column count mismatch");
    for (Bit b : row) {
      if (b > 1) throw ArgumentError("BinaryBehaviorClass: value is not 0 or 1");
    }
  }
}

namespace {

std::vector<std::string> names_of(const FunctionClass& F) {
  std::vector<std::string> names;
  for (std::uint64_t i = 0; i < F.size(); ++i) names.push_back(F.member(i).name());
  return names;
}

void check_points(const BinaryBehaviorClass& C, const std::vector<std::size_t>& points) {
  if (points.size() >= 63 || (std::uint64_t{1} << points.size()) > kEnumerationBudget) {
    throw ResourceError("2^" + std::to_string(points.size()) + " labelings exceed the enumeration budget");
  }
  for (std::size_t p : points) {
    if (p >= C.point_count()) throw RangeError("point index " + std::to_string(p) + " out of range");
  }
}

std::uint64_t pattern(const BinaryBehaviorClass& C, std::size_t f, const std::vector<std::size_t>& points) {
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    mask |= static_cast<std::uint64_t>(C.value(f, points[i])) << i;
  }
  return mask;
}

std::string labeling_text(std::uint64_t mask, std::size_t k) {
  std::string s(k, '0');
  for (std::size_t i = 0; i < k; ++i) s[i] = ((mask >> i) & 1u) ? '1' : '0';
  return s;
}

class VcSearch {
 public:
  VcSearch(const BinaryBehaviorClass& C, std::size_t cap) : cap_(cap) {
    // Distinct rows bound the shatterable size; duplicate and constant
    // columns can never extend a shattered set.
    std::set<std::vector<Bit>> rows;
    for (std::size_t f = 0; f < C.function_count(); ++f) {
      std::vector<Bit> row(C.point_count());
      for (std::size_t p = 0; p < C.point_count(); ++p) row[p] = C.value(f, p);
      rows.insert(std::move(row));
    }
    rows_ = std::vector<std::vector<Bit>>(rows.begin(), rows.end());
    std::set<std::vector<Bit>> seen;
    for (std::size_t p = 0; p < C.point_count(); ++p) {
      std::vector<Bit> column(rows_.size());
      for (std::size_t f = 0; f < rows_.size(); ++f) column[f] = rows_[f][p];
      const bool constant = std::ranges::all_of(column, [&](Bit b) { return b == column.front(); });
      if (!constant && seen.insert(column).second) {
        columns_.push_back(std::move(column));
        column_points_.push_back(p);
      }
    }
    limit_ = 0;
    while (limit_ + 1 < 63 && (std::uint64_t{1} << (limit_ + 1)) <= rows_.size()) ++limit_;
    limit_ = std::min(limit_, cap_);
  }

  VcResult run() {
    std::vector<std::uint64_t> masks(rows_.size(), 0);
    std::vector<std::size_t> chosen;
    extend(0, masks, chosen);
    VcResult out;
    out.dimension = best_.size();
    for (std::size_t c : best_) out.witness.push_back(column_points_[c]);
    return out;
  }

 private:
  void extend(std::size_t start, const std::vector<std::uint64_t>& masks, std::vector<std::size_t>& chosen) {
    if (chosen.size() > best_.size()) best_ = chosen;
    if (best_.size() >= limit_ || chosen.size() >= limit_) return;
    const std::size_t d = chosen.size();
    std::vector<std::uint64_t> next(masks.size());
    std::vector<std::uint64_t> distinct;
    for (std::size_t c = start; c < columns_.size(); ++c) {
      // Not enough columns left to beat the best.
      if (d + (columns_.size() - c) <= best_.size()) return;
      for (std::size_t f = 0; f < masks.size(); ++f) {
        next[f] = masks[f] | (static_cast<std::uint64_t>(columns_[c][f]) << d);
      }
      distinct = next;
      std::ranges::sort(distinct);
      const auto count = static_cast<std::size_t>(std::unique(distinct.begin(), distinct.end()) - distinct.begin());
      if (count == (std::size_t{1} << (d + 1))) {
        chosen.push_back(c);
        extend(c + 1, next, chosen);
        chosen.pop_back();
        if (best_.size() >= limit_) return;
      }
    }
  }

  std::size_t cap_;
  std::size_t limit_ = 0;
  std::vector<std::vector<Bit>> rows_;
  std::vector<std::vector<Bit>> columns_;
  std::vector<std::size_t> column_points_;
  std::vector<std::size_t> best_;
};

}  // namespace

BinaryBehaviorClass function_behaviors(const FunctionClass& F, const std::vector<BitString>& panel) {
  const auto fs = F.members();
  std::vector<std::vector<Bit>> table(fs.size(), std::vector<Bit>(panel.size()));
  std::vector<std::string> points;
  for (const auto& s : panel) points.push_back(s.str());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    for (std::size_t p = 0; p < panel.size(); ++p) table[i][p] = fs[i](panel[p]);
  }
  return BinaryBehaviorClass(names_of(F), std::move(points), std::move(table));
}

BinaryBehaviorClass end_token_behaviors(const FunctionClass& F, const std::vector<BitString>& prompts) {
  const auto fs = F.members();
  std::vector<std::vector<Bit>> table(fs.size(), std::vector<Bit>(prompts.size()));
  std::vector<std::string> points;
  for (const auto& s : prompts) points.push_back(s.str());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    for (std::size_t p = 0; p < prompts.size(); ++p) {
      table[i][p] = last(autoregress(fs[i], prompts[p], F.horizon()));
    }
  }
  return BinaryBehaviorClass(names_of(F), std::move(points), std::move(table));
}

BinaryBehaviorClass reward_behaviors(const RewardClass& R,
                                     const std::vector<std::pair<BitString, BitString>>& panel) {
  if (R.size() > kEnumerationBudget) throw ResourceError("reward_behaviors: class exceeds the budget");
  std::vector<std::vector<Bit>> table(R.size(), std::vector<Bit>(panel.size()));
  std::vector<std::string> names;
  std::vector<std::string> points;
  for (const auto& [x, y] : panel) points.push_back(x.str() + "|" + y.str());
  // Trajectories depend on x alone; cache them per distinct prompt.
  for (std::uint64_t i = 0; i < R.size(); ++i) {
    const RewardFn r = R.member(i);
    names.push_back(r.name());
    const BitString* last_x = nullptr;
    BitString traj;
    for (std::size_t p = 0; p < panel.size(); ++p) {
      if (!last_x || !(*last_x == panel[p].first)) {
        traj = r.target_response(panel[p].first);
        last_x = &panel[p].first;
      }
      table[i][p] = r.compare(traj, panel[p].second);
    }
  }
  return BinaryBehaviorClass(std::move(names), std::move(points), std::move(table));
}

std::vector<BitString> strings_of_lengths(std::size_t lo, std::size_t hi) {
  std::vector<BitString> out;
  for (std::size_t len = lo; len <= hi; ++len) {
    auto block = all_strings(len);
    if (out.size() + block.size() > kEnumerationBudget) throw ResourceError("panel exceeds the budget");
    out.insert(out.end(), std::make_move_iterator(block.begin()), std::make_move_iterator(block.end()));
  }
  return out;
}

std::vector<std::pair<BitString, BitString>> prompt_response_panel(std::size_t prompt_length,
                                                                   std::size_t horizon) {
  if (prompt_length + horizon >= 63 ||
      (std::uint64_t{1} << (prompt_length + horizon)) > kEnumerationBudget) {
    throw ResourceError("prompt-response panel exceeds the budget");
  }
  const auto xs = all_strings(prompt_length);
  const auto ys = all_strings(horizon);
  std::vector<std::pair<BitString, BitString>> out;
  out.reserve(xs.size() * ys.size());
  for (const auto& x : xs) {
    for (const auto& y : ys) out.emplace_back(x, y);
  }
  return out;
}

std::string ShatterCertificate::to_json() const {
  nlohmann::json j;
  j["shattered"] = shattered;
  j["points"] = points;
  j["witnesses"] = witnesses;
  j["missing"] = missing;
  return j.dump(2);
}

bool shatter_check(const BinaryBehaviorClass& C, const std::vector<std::size_t>& points) {
  check_points(C, points);
  std::set<std::uint64_t> seen;
  const std::uint64_t need = std::uint64_t{1} << points.size();
  for (std::size_t f = 0; f < C.function_count() && seen.size() < need; ++f) {
    seen.insert(pattern(C, f, points));
  }
  return seen.size() == need;
}

ShatterCertificate shatter_certificate(const BinaryBehaviorClass& C, const std::vector<std::size_t>& points) {
  check_points(C, points);
  ShatterCertificate cert;
  cert.points = points;
  const std::uint64_t need = std::uint64_t{1} << points.size();
  std::vector<std::optional<std::size_t>> witness(need);
  for (std::size_t f = 0; f < C.function_count(); ++f) {
    auto& w = witness[pattern(C, f, points)];
    if (!w) w = f;
  }
  for (std::uint64_t mask = 0; mask < need; ++mask) {
    const std::string label = labeling_text(mask, points.size());
    if (witness[mask]) {
      cert.witnesses[label] = C.names()[*witness[mask]];
    } else {
      cert.missing.push_back(label);
    }
  }
  cert.shattered = cert.missing.empty();
  return cert;
}

VcResult vc_search(const BinaryBehaviorClass& C, std::size_t cap) {
  return VcSearch(C, std::min<std::size_t>(cap, 62)).run();
}

std::size_t vc_dimension(const BinaryBehaviorClass& C, std::size_t cap) { return vc_search(C, cap).dimension; }

std::uint64_t growth_function(const BinaryBehaviorClass& C, const std::vector<std::size_t>& points) {
  check_points(C, points);
  std::set<std::uint64_t> seen;
  for (std::size_t f = 0; f < C.function_count(); ++f) seen.insert(pattern(C, f, points));
  return seen.size();
}

double kl_bernoulli(double a, double b) {
  if (!(a >= 0.0 && a <= 1.0) || !(b >= 0.0 && b <= 1.0)) {
    throw ArgumentError("kl_bernoulli: arguments must lie in [0, 1]");
  }
  auto term = [](double p, double q) {
    if (p == 0.0) return 0.0;
    if (q == 0.0) return std::numeric_limits<double>::infinity();
    return p * std::log(p / q);
  };
  return term(a, b) + term(1.0 - a, 1.0 - b);
}

double delta_term(double delta, double p, std::uint64_t n) {
  if (!(delta > 0.0 && delta < 1.0)) throw ArgumentError("delta_term: δ must lie in (0, 1)");
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("delta_term: p must lie in (0, 1)");
  if (n == 0) throw ArgumentError("delta_term: n must be at least 1");
  return std::log(2.0 / delta) + 4.0 * std::log(static_cast<double>(n) + 1.0) + std::abs(std::log(p / (1.0 - p)));
}

double sample_min_binomial(std::uint64_t copies, std::uint64_t n, double p, Rng& rng) {
  if (copies == 0 || n == 0) throw ArgumentError("sample_min_binomial: copies and n must be at least 1");
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("sample_min_binomial: p must lie in [0, 1]");
  std::uint64_t best = n;
  for (std::uint64_t c = 0; c < copies; ++c) {
    std::uint64_t k = 0;
    for (std::uint64_t i = 0; i < n; ++i) k += rng.bernoulli(p) ? 1 : 0;
    best = std::min(best, k);
  }
  return static_cast<double>(best) / static_cast<double>(n);
}

namespace {

double disagreement(const RewardFn& r, const RewardFn& truth, const PromptDistribution& P,
                    const ResponsePolicy& base) {
  double total = 0.0;
  P.for_each(dependence_under(P, base, truth, r), [&](BitView x, double w) {
    for (const auto& [y, p] : base.distribution(x)) {
      if (r(x, y) != truth(x, y)) total += w * p;
    }
  });
  return total;
}

}  // namespace

double compute_kappa(std::span<const RewardFn> R, const RewardFn& truth, const PromptDistribution& P,
                     const ResponsePolicy& base) {
  if (R.empty()) throw ArgumentError("compute_kappa: empty class");
  double best = 1.0;
  for (const auto& r : R) best = std::min(best, disagreement(r, truth, P, base));
  return best;
}

double compute_kappa(const RewardClass& R, const RewardFn& truth, const PromptDistribution& P,
                     const ResponsePolicy& base) {
  if (R.size() > kEnumerationBudget) throw ResourceError("compute_kappa: class exceeds the budget");
  double best = 1.0;
  for (std::uint64_t i = 0; i < R.size(); ++i) best = std::min(best, disagreement(R.member(i), truth, P, base));
  return best;
}

Estimate compute_kappa_mc(std::span<const RewardFn> R, const RewardFn& truth, const PromptDistribution& P,
                          const ResponsePolicy& base, std::uint64_t m, Rng& rng) {
  if (R.empty()) throw ArgumentError("compute_kappa_mc: empty class");
  if (m == 0) throw ArgumentError("compute_kappa_mc: m must be at least 1");
  std::vector<std::uint64_t> misses(R.size(), 0);
  for (std::uint64_t i = 0; i < m; ++i) {
    const BitString x = P.sample(rng);
    const BitString y = base.sample(x, rng);
    const double t = truth(x, y);
    for (std::size_t k = 0; k < R.size(); ++k) misses[k] += R[k](x, y) != t ? 1 : 0;
  }
  const double p = static_cast<double>(*std::ranges::min_element(misses)) / static_cast<double>(m);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(m))};
}

double bound_H(std::uint64_t n, double vc, double delta) {
  if (n == 0) throw ArgumentError("bound_H: n must be at least 1");
  if (!(vc >= 0.0)) throw ArgumentError("bound_H: vc must be non-negative");
  if (!(delta > 0.0 && delta < 1.0)) throw ArgumentError("bound_H: δ must lie in (0, 1)");
  return std::sqrt((vc + std::log(1.0 / delta)) / static_cast<double>(n));
}

double finite_bon_risk(std::uint64_t n, double class_size, double alpha, double delta) {
  return vc_bon_risk(n, std::log(class_size), alpha, delta);
}

double vc_bon_risk(std::uint64_t n, double vc, double alpha, double delta) {
  if (n == 0) throw ArgumentError("vc_bon_risk: n must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("vc_bon_risk: α must lie in (0, 1)");
  const double nn = static_cast<double>(n);
  return std::log(nn) * (vc + std::log(1.0 / delta)) / (-std::log1p(-alpha) * nn) + 1.0 / nn;
}

double agnostic_bon_risk(double kappa, double H, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("agnostic_bon_risk: α must lie in (0, 1)");
  const double log_q = std::log1p(-alpha);
  const double s = kappa + H;
  if (s <= 0.0) return 0.0;
  return s * (std::log(s / -log_q) / log_q - 1.0 / log_q);
}

double agnostic_bon_risk_limit(double kappa, double alpha) { return agnostic_bon_risk(kappa, 0.0, alpha); }

double realizable_sft_risk(std::uint64_t n, std::size_t horizon, double vc, double delta) {
  if (n == 0) throw ArgumentError("realizable_sft_risk: n must be at least 1");
  return std::log(static_cast<double>(horizon)) * (vc + std::log(1.0 / delta)) / static_cast<double>(n);
}

double noisy_sft_risk(std::uint64_t n, std::size_t horizon, double class_size, double delta) {
  if (n == 0) throw ArgumentError("noisy_sft_risk: n must be at least 1");
  return std::sqrt(std::log(class_size / delta) / static_cast<double>(n)) * static_cast<double>(horizon);
}

double reward_overlay(double risk) { return std::clamp(1.0 - risk, 0.0, 1.0); }

}  // namespace bitlab

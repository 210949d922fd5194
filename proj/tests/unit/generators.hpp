#pragma once

// Random instance generators for property tests.

#include <cstdint>
#include <vector>

#include "bitlab/policies.hpp"
#include "bitlab/rng.hpp"

namespace bitlab::testgen {

inline BitString bits(Rng& rng, std::size_t length) {
  std::vector<Bit> out(length);
  for (auto& b : out) b = rng.bit();
  return BitString(std::move(out));
}

inline BitString string_up_to(Rng& rng, std::size_t max_length) {
  return bits(rng, rng.uniform_index(max_length + 1));
}

inline std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + rng.uniform_index(hi - lo + 1);
}

inline std::vector<Bit> labels(Rng& rng, std::size_t count) {
  std::vector<Bit> out(count);
  for (auto& b : out) b = rng.bit();
  return out;
}

/// Shift or table class with small parameters.
inline FunctionClass small_class(Rng& rng, std::size_t horizon, std::size_t* prompt_length) {
  if (rng.bit()) {
    const std::size_t D = between(rng, 1, 4);
    *prompt_length = D * horizon + 1;
    return make_shift_class(D, horizon);
  }
  TableConstruction t = make_table_class(between(rng, 1, 4), horizon);
  *prompt_length = t.prompts.front().size();
  return t.functions;
}

/// Deterministic, uniform, fixed-last or a two-part mixture of those.
inline ResponsePolicy small_policy(Rng& rng, const FunctionClass& F) {
  const std::size_t T = F.horizon();
  auto simple = [&]() {
    switch (rng.uniform_index(3)) {
      case 0:
        return ResponsePolicy::deterministic(F.member(rng.uniform_index(F.size())), T);
      case 1:
        return ResponsePolicy::uniform(T);
      default:
        return ResponsePolicy::uniform_fixed_last(rng.bit(), T);
    }
  };
  if (rng.uniform_index(4) != 0) return simple();
  const double w = 0.1 + 0.8 * rng.uniform01();
  return ResponsePolicy::mixture({{w, simple()}, {1.0 - w, simple()}});
}

}  // namespace bitlab::testgen

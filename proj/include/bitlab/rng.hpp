#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "bitlab/core.hpp"

namespace bitlab {

/// Seeded random source passed explicitly to every sampling routine.
///
/// Wraps mt19937_64 and implements its own bounded-integer and unit-interval
/// draws so that streams are reproducible across standard libraries.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  Bit bit() {
    if (buffered_ == 0) {
      buffer_ = engine_();
      buffered_ = 64;
    }
    Bit b = static_cast<Bit>(buffer_ & 1u);
    buffer_ >>= 1;
    --buffered_;
    return b;
  }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw ArgumentError("uniform_index: empty range");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t buffer_ = 0;
  int buffered_ = 0;
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Seed of the independent stream for one (scenario, cell, trial) triple.
constexpr std::uint64_t derive_stream_seed(std::uint64_t master, std::string_view scenario,
                                           std::uint64_t cell, std::uint64_t trial) {
  std::uint64_t h = splitmix64(master ^ fnv1a(scenario));
  h = splitmix64(h ^ (cell * 0x9e3779b97f4a7c15ull));
  return splitmix64(h ^ (trial + 0x632be59bd9b4e019ull));
}

}  // namespace bitlab

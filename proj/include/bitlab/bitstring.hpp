#pragma once

#include <compare>
#include <concepts>
#include <cstddef>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "bitlab/core.hpp"

namespace bitlab {

/// Non-owning view over a sequence of bits.
class BitView {
 public:
  constexpr BitView() = default;
  constexpr BitView(std::span<const Bit> bits) : bits_(bits) {}

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }

  /// Unchecked access; use element() for checked and negative indexing.
  Bit operator[](std::size_t t) const { return bits_[t]; }

  std::span<const Bit> bits() const { return bits_; }
  auto begin() const { return bits_.begin(); }
  auto end() const { return bits_.end(); }

  BitView first(std::size_t count) const { return BitView(bits_.first(count)); }
  BitView subview(std::size_t offset, std::size_t count) const {
    return BitView(bits_.subspan(offset, count));
  }

  std::string str() const;

  friend bool operator==(BitView a, BitView b);

 private:
  std::span<const Bit> bits_;
};

/// Owning, immutable-by-convention finite bit string.
class BitString {
 public:
  BitString() = default;
  /// Throws ArgumentError on a symbol other than 0/1, ResourceError above kMaxLength.
  explicit BitString(std::vector<Bit> bits);
  explicit BitString(BitView view);

  /// Parses the ASCII encoding over {'0','1'}; "" is the empty string.
  static BitString parse(std::string_view text);
  static BitString filled(std::size_t length, Bit value);

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  Bit operator[](std::size_t t) const { return bits_[t]; }

  BitView view() const { return BitView(std::span<const Bit>(bits_)); }
  operator BitView() const { return view(); }
  const std::vector<Bit>& bits() const { return bits_; }
  auto begin() const { return bits_.begin(); }
  auto end() const { return bits_.end(); }

  std::string str() const { return view().str(); }

  friend bool operator==(const BitString&, const BitString&) = default;
  friend auto operator<=>(const BitString&, const BitString&) = default;

 private:
  std::vector<Bit> bits_;
};

std::ostream& operator<<(std::ostream& os, BitView s);
std::ostream& operator<<(std::ostream& os, const BitString& s);

BitString concat(BitView a, BitView b);

/// t-th symbol, 0-based. Negative t counts from the end: -1 is the last symbol.
Bit element(BitView s, std::ptrdiff_t t);
Bit last(BitView s);
/// Symbols strictly before position t, 0 <= t <= len(s).
BitString prefix(BitView s, std::size_t t);

template <class Rule>
concept NextTokenRule = std::is_invocable_r_v<Bit, const Rule&, BitView>;

/// s followed by f(s).
template <NextTokenRule Rule>
BitString append_step(const Rule& f, BitView s, std::size_t max_length = kMaxLength) {
  if (s.size() + 1 > max_length) throw ResourceError("append_step: length guard exceeded");
  std::vector<Bit> out(s.begin(), s.end());
  Bit b = std::invoke(f, s);
  if (b > 1) throw ArgumentError("append_step: rule returned a non-binary symbol");
  out.push_back(b);
  return BitString(std::move(out));
}

/// The T-symbol response obtained by repeatedly appending f's prediction to x.
/// result[t] == f(x + result[:t]) for every t < T.
template <NextTokenRule Rule>
BitString autoregress(const Rule& f, BitView x, std::size_t horizon,
                      std::size_t max_length = kMaxLength) {
  if (horizon == 0) throw ArgumentError("autoregress: horizon must be at least 1");
  if (x.size() + horizon > max_length) throw ResourceError("autoregress: length guard exceeded");
  std::vector<Bit> buffer;
  buffer.reserve(x.size() + horizon);
  buffer.assign(x.begin(), x.end());
  for (std::size_t t = 0; t < horizon; ++t) {
    Bit b = std::invoke(f, BitView(std::span<const Bit>(buffer)));
    if (b > 1) throw ArgumentError("autoregress: rule returned a non-binary symbol");
    buffer.push_back(b);
  }
  return BitString(std::vector<Bit>(buffer.begin() + static_cast<std::ptrdiff_t>(x.size()),
                                    buffer.end()));
}

/// All 2^length strings of the given length in increasing binary order.
/// Throws ResourceError when 2^length exceeds the enumeration budget.
std::vector<BitString> all_strings(std::size_t length);

/// Big-endian binary encoding of value, zero-padded to width symbols.
BitString to_binary(std::uint64_t value, std::size_t width);

}  // namespace bitlab

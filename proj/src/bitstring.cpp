#include "bitlab/bitstring.hpp"

#include <algorithm>

namespace bitlab {

std::string BitView::str() const {
  std::string out(size(), '0');
  for (std::size_t t = 0; t < size(); ++t) out[t] = bits_[t] ? '1' : '0';
  return out;
}

bool operator==(BitView a, BitView b) {
  return std::ranges::equal(a.bits(), b.bits());
}

BitString::BitString(std::vector<Bit> bits) : bits_(std::move(bits)) {
  if (bits_.size() > kMaxLength) throw ResourceError("BitString: length guard exceeded");
  for (Bit b : bits_) {
    if (b > 1) throw ArgumentError("BitString: symbol is not 0 or 1");
  }
}

BitString::BitString(BitView view) : BitString(std::vector<Bit>(view.begin(), view.end())) {}

BitString BitString::parse(std::string_view text) {
  std::vector<Bit> bits;
  bits.reserve(text.size());
  for (char c : text) {
    if (c != '0' && c != '1') {
      throw ArgumentError("BitString::parse: invalid symbol '" + std::string(1, c) + "' in \"" +
                          std::string(text) + "\"");
    }
    bits.push_back(static_cast<Bit>(c - '0'));
  }
  return BitString(std::move(bits));
}

BitString BitString::filled(std::size_t length, Bit value) {
  return BitString(std::vector<Bit>(length, value));
}

std::ostream& operator<<(std::ostream& os, BitView s) { return os << '"' << s.str() << '"'; }
std::ostream& operator<<(std::ostream& os, const BitString& s) { return os << s.view(); }

BitString concat(BitView a, BitView b) {
  if (a.size() + b.size() > kMaxLength) throw ResourceError("concat: length guard exceeded");
  std::vector<Bit> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return BitString(std::move(out));
}

Bit element(BitView s, std::ptrdiff_t t) {
  const auto len = static_cast<std::ptrdiff_t>(s.size());
  const std::ptrdiff_t pos = t < 0 ? len + t : t;
  if (pos < 0 || pos >= len) {
    throw RangeError("element: index " + std::to_string(t) + " out of range for length " +
                     std::to_string(len));
  }
  return s[static_cast<std::size_t>(pos)];
}

Bit last(BitView s) {
  if (s.empty()) throw RangeError("last: empty string");
  return s[s.size() - 1];
}

BitString prefix(BitView s, std::size_t t) {
  if (t > s.size()) {
    throw RangeError("prefix: position " + std::to_string(t) + " beyond length " +
                     std::to_string(s.size()));
  }
  return BitString(s.first(t));
}

std::vector<BitString> all_strings(std::size_t length) {
  if (length >= 63 || (std::uint64_t{1} << length) > kEnumerationBudget) {
    throw ResourceError("all_strings: 2^" + std::to_string(length) + " exceeds the enumeration budget");
  }
  const std::uint64_t count = std::uint64_t{1} << length;
  std::vector<BitString> out;
  out.reserve(count);
  for (std::uint64_t v = 0; v < count; ++v) out.push_back(to_binary(v, length));
  return out;
}

BitString to_binary(std::uint64_t value, std::size_t width) {
  std::vector<Bit> bits(width, 0);
  for (std::size_t i = 0; i < width; ++i) {
    bits[width - 1 - i] = static_cast<Bit>((i < 64) ? (value >> i) & 1u : 0u);
  }
  return BitString(std::move(bits));
}

}  // namespace bitlab

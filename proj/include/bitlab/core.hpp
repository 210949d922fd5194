#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace bitlab {

/// A binary symbol. Valid values are 0 and 1.
using Bit = std::uint8_t;

/// Longest bit string any operation will build.
inline constexpr std::size_t kMaxLength = std::size_t{1} << 20;

/// Largest number of labelings, behaviors, members or prompts enumerated exhaustively.
inline constexpr std::uint64_t kEnumerationBudget = std::uint64_t{1} << 22;

// Error taxonomy. Range errors signal caller bugs, resource errors signal
// exhausted budgets, capability errors signal unsupported modes.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Point estimate with its standard error; exact values carry se == 0.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

}  // namespace bitlab

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bitlab {

struct CriterionResult {
  std::string id;
  std::string title;
  bool passed = false;
  std::string details;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 20240601;
  std::optional<std::uint64_t> trials;      // overrides every scenario's default
  std::optional<std::uint64_t> mc_samples;
};

/// Identifiers of every acceptance criterion, in run order.
const std::vector<std::string>& criterion_ids();
/// Short ids accepted by `bitlab verify-theorem`.
const std::vector<std::string>& short_ids();

/// Throws ArgumentError on an unknown id.
CriterionResult run_criterion(const std::string& id, const VerifyOptions& options = {});

/// "PASS id: title (details)" or "FAIL ...".
std::string format_result(const CriterionResult& result);

}  // namespace bitlab

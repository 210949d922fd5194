#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "bitlab/policies.hpp"

namespace bitlab {

/// A function class built from a config descriptor, with the prompt length
/// its constructions are meant for.
struct BuiltClass {
  FunctionClass functions;
  std::size_t prompt_length = 0;
  std::vector<BitString> prompts;  // explicit prompts of table classes, else empty
};

// {"kind":"counting_pair"} | {"kind":"shift","D":int,"T":int} | {"kind":"table","m":int,"T":int}
// counting_pair accepts an optional "T" (default 2).
BuiltClass build_class(const nlohmann::json& descriptor);

// {"kind":"deterministic","f":name} | {"kind":"uniform"} | {"kind":"uniform_fixed_last","bit":0|1}
// | {"kind":"mixture","components":[{"weight":w,"policy":{...}}, ...]}
// Names in "f" resolve against `functions` first, then const0, const1, last_bit.
ResponsePolicy build_policy(const nlohmann::json& descriptor, std::size_t horizon,
                            const FunctionClass* functions = nullptr);

/// Inverse of build_policy. Throws CapabilityError for table policies.
nlohmann::json policy_descriptor(const ResponsePolicy& policy);

}  // namespace bitlab

#include "bitlab/descriptors.hpp"

namespace bitlab {

using nlohmann::json;

namespace {

std::size_t positive(const json& d, const char* key) {
  if (!d.contains(key)) throw ArgumentError(std::string("descriptor: missing \"") + key + "\"");
  const auto& v = d.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) {
    throw ArgumentError(std::string("descriptor: \"") + key + "\" must be a positive integer");
  }
  return v.get<std::size_t>();
}

std::string kind_of(const json& d) {
  if (!d.is_object() || !d.contains("kind") || !d.at("kind").is_string()) {
    throw ArgumentError("descriptor: expected an object with a string \"kind\"");
  }
  return d.at("kind").get<std::string>();
}

}  // namespace

BuiltClass build_class(const json& d) {
  const std::string kind = kind_of(d);
  if (kind == "counting_pair") {
    const std::size_t T = d.contains("T") ? positive(d, "T") : 2;
    return {make_counting_pair(T), 2, {}};
  }
  if (kind == "shift") {
    const std::size_t D = positive(d, "D");
    const std::size_t T = positive(d, "T");
    return {make_shift_class(D, T), D * T + 1, {}};
  }
  if (kind == "table") {
    TableConstruction t = make_table_class(positive(d, "m"), positive(d, "T"));
    const std::size_t L = t.prompts.front().size();
    return {std::move(t.functions), L, std::move(t.prompts)};
  }
  throw ArgumentError("descriptor: unknown class kind \"" + kind + "\"");
}

ResponsePolicy build_policy(const json& d, std::size_t horizon, const FunctionClass* functions) {
  const std::string kind = kind_of(d);
  if (kind == "uniform") return ResponsePolicy::uniform(horizon);
  if (kind == "uniform_fixed_last") {
    const int bit = d.value("bit", -1);
    if (bit != 0 && bit != 1) throw ArgumentError("descriptor: \"bit\" must be 0 or 1");
    return ResponsePolicy::uniform_fixed_last(static_cast<Bit>(bit), horizon);
  }
  if (kind == "deterministic") {
    if (!d.contains("f") || !d.at("f").is_string()) throw ArgumentError("descriptor: missing \"f\"");
    const std::string name = d.at("f");
    if (functions) {
      if (auto i = functions->find(name)) return ResponsePolicy::deterministic(functions->member(*i), horizon);
    }
    if (name == "const0") return ResponsePolicy::deterministic(constant_predictor(0), horizon);
    if (name == "const1") return ResponsePolicy::deterministic(constant_predictor(1), horizon);
    if (name == "last_bit") return ResponsePolicy::deterministic(last_bit_predictor(), horizon);
    throw ArgumentError("descriptor: unknown predictor \"" + name + "\"");
  }
  if (kind == "mixture") {
    if (!d.contains("components") || !d.at("components").is_array()) {
      throw ArgumentError("descriptor: mixture needs a \"components\" array");
    }
    std::vector<PolicyComponent> parts;
    for (const auto& c : d.at("components")) {
      if (!c.contains("weight") || !c.at("weight").is_number() || !c.contains("policy")) {
        throw ArgumentError("descriptor: mixture component needs \"weight\" and \"policy\"");
      }
      parts.push_back({c.at("weight").get<double>(), build_policy(c.at("policy"), horizon, functions)});
    }
    return ResponsePolicy::mixture(std::move(parts));
  }
  throw ArgumentError("descriptor: unknown policy kind \"" + kind + "\"");
}

json policy_descriptor(const ResponsePolicy& policy) {
  switch (policy.kind()) {
    case ResponsePolicy::Kind::deterministic:
      return {{"kind", "deterministic"}, {"f", policy.function()->name()}};
    case ResponsePolicy::Kind::uniform:
      return {{"kind", "uniform"}};
    case ResponsePolicy::Kind::uniform_fixed_last:
      return {{"kind", "uniform_fixed_last"}, {"bit", static_cast<int>(*policy.fixed_last())}};
    case ResponsePolicy::Kind::mixture: {
      json parts = json::array();
      for (const auto& c : policy.components()) {
        parts.push_back({{"weight", c.weight}, {"policy", policy_descriptor(c.policy)}});
      }
      return {{"kind", "mixture"}, {"components", parts}};
    }
    case ResponsePolicy::Kind::table:
      break;
  }
  throw CapabilityError("policy_descriptor: table policies have no descriptor");
}

}  // namespace bitlab

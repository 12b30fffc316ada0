#include "unigest/gesture_codec.hpp"

#include <fstream>

#include <json.hpp>

#include "unigest/errors.hpp"

namespace unigest {

using nlohmann::json;

GestureRegistry GestureRegistry::default_registry() {
  // Default table follows the usual one-hand digit gestures: counting
  // fingers for one through five, then thumb+pinky for six, thumb+index+
  // pinky for seven, thumb+index for eight.
  GestureRegistry r;
  r.add("SingleOne", GestureCode{{0, 1, 0, 0, 0}});
  r.add("SingleTwo", GestureCode{{0, 1, 1, 0, 0}});
  r.add("SingleThree", GestureCode{{0, 1, 1, 1, 0}});
  r.add("SingleFour", GestureCode{{0, 1, 1, 1, 1}});
  r.add("SingleFive", GestureCode{{1, 1, 1, 1, 1}});
  r.add("SingleSix", GestureCode{{1, 0, 0, 0, 1}});
  r.add("SingleSeven", GestureCode{{1, 1, 0, 0, 1}});
  r.add("SingleEight", GestureCode{{1, 1, 0, 0, 0}});
  return r;
}

void GestureRegistry::add(const std::string& name, const GestureCode& code) {
  if (code.popcount() == 0) throw DataError("registry: all-zero code for class " + name);
  for (const auto& [n, c] : entries_) {
    if (n == name) throw DataError("registry: duplicate class name " + name);
    if (c == code)
      throw DataError("registry: duplicate code " + code.to_string() + " for classes " + n +
                      " and " + name);
  }
  entries_.emplace_back(name, code);
}

std::optional<std::string> GestureRegistry::find(const GestureCode& code) const {
  for (const auto& [name, c] : entries_)
    if (c == code) return name;
  return std::nullopt;
}

std::optional<GestureCode> GestureRegistry::code_of(const std::string& name) const {
  for (const auto& [n, c] : entries_)
    if (n == name) return c;
  return std::nullopt;
}

std::vector<std::string> GestureRegistry::class_names() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  for (const auto& [n, c] : entries_) names.push_back(n);
  return names;
}

GestureRegistry GestureRegistry::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open registry: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw DataError(path.string() + ": registry must be a JSON object");
  GestureRegistry r;
  for (const auto& [name, value] : j.items()) {
    if (!value.is_array() || value.size() != kNumFingers)
      throw DataError(path.string() + ": class " + name + " must map to a 5-bit array");
    GestureCode code;
    for (int i = 0; i < kNumFingers; ++i) {
      int bit = value[i].get<int>();
      if (bit != 0 && bit != 1)
        throw DataError(path.string() + ": class " + name + " has a non-binary bit");
      code.bits[i] = static_cast<uint8_t>(bit);
    }
    r.add(name, code);
  }
  if (r.empty()) throw DataError(path.string() + ": registry is empty");
  return r;
}

void GestureRegistry::save_json(const std::filesystem::path& path) const {
  // Keys are written alphabetically; entry order is re-established on load.
  json j = json::object();
  for (const auto& [name, code] : entries_) {
    json bits = json::array();
    for (uint8_t b : code.bits) bits.push_back(static_cast<int>(b));
    j[name] = bits;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write registry: " + path.string());
  out << j.dump(2) << "\n";
}

GestureCode encode_visibility(const std::set<FingerId>& visible) {
  GestureCode code;
  for (FingerId f : visible) code[f] = 1;
  return code;
}

GestureCode binarize(const FingerProbabilities& probs, Threshold tau) {
  GestureCode code;
  for (int i = 0; i < kNumFingers; ++i) code.bits[i] = probs.p[i] > tau.value ? 1 : 0;
  return code;
}

std::string classify(const GestureCode& code, const GestureRegistry& registry) {
  if (auto name = registry.find(code)) return *name;
  return kUnknownClass;
}

}  // namespace unigest

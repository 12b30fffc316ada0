#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "unigest/core.hpp"

namespace unigest {

// Confidence cutoff above which a finger counts as visible. Equality
// maps to hidden: a fingertip is only reported with strict evidence.
struct Threshold {
  double value = 0.5;
};

// Mapping from gesture class names to visibility codes. Codes are unique
// and never all-zero. Entry order is stable (insertion order) and defines
// the row/column order of every report.
class GestureRegistry {
 public:
  // The eight digit-gesture classes with the built-in default code table.
  // The per-class codes are configuration, not ground truth; datasets may
  // ship their own registry.json that overrides them.
  static GestureRegistry default_registry();

  static GestureRegistry from_json_file(const std::filesystem::path& path);
  void save_json(const std::filesystem::path& path) const;

  // Throws DataError on duplicate name, duplicate code, or all-zero code.
  void add(const std::string& name, const GestureCode& code);

  std::optional<std::string> find(const GestureCode& code) const;
  std::optional<GestureCode> code_of(const std::string& name) const;

  const std::vector<std::pair<std::string, GestureCode>>& entries() const { return entries_; }
  std::vector<std::string> class_names() const;
  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }

 private:
  std::vector<std::pair<std::string, GestureCode>> entries_;
};

// Bit f is set exactly when f is in `visible`.
GestureCode encode_visibility(const std::set<FingerId>& visible);

// Thresholds per-finger confidences into a visibility code: bit = 1 iff
// p > tau (strict; p == tau maps to 0).
GestureCode binarize(const FingerProbabilities& probs, Threshold tau);

// Exact-match lookup; "unknown" when no registered code matches.
std::string classify(const GestureCode& code, const GestureRegistry& registry);

inline constexpr const char* kUnknownClass = "unknown";

}  // namespace unigest

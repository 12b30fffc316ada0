#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "unigest/image.hpp"

namespace unigest {

// Finger ordering is fixed and total: thumb, index, middle, ring, pinky.
enum class FingerId : int { thumb = 0, index = 1, middle = 2, ring = 3, pinky = 4 };

inline constexpr int kNumFingers = 5;
inline constexpr int kEnsembleSide = 2 * kNumFingers;  // 10

constexpr std::array<FingerId, kNumFingers> kAllFingers = {
    FingerId::thumb, FingerId::index, FingerId::middle, FingerId::ring, FingerId::pinky};

const char* finger_name(FingerId f);

// Length-5 binary finger-visibility vector; the gesture's identity.
struct GestureCode {
  std::array<uint8_t, kNumFingers> bits{};

  uint8_t& operator[](FingerId f) { return bits[static_cast<int>(f)]; }
  uint8_t operator[](FingerId f) const { return bits[static_cast<int>(f)]; }

  int popcount() const {
    int n = 0;
    for (uint8_t b : bits) n += b ? 1 : 0;
    return n;
  }

  bool operator==(const GestureCode&) const = default;

  std::string to_string() const;  // e.g. "[1 1 0 0 1]"
};

// Per-finger visibility confidences, each in [0, 1].
struct FingerProbabilities {
  std::array<double, kNumFingers> p{};

  double& operator[](FingerId f) { return p[static_cast<int>(f)]; }
  double operator[](FingerId f) const { return p[static_cast<int>(f)]; }
};

// 10x10 matrix of replicated normalized fingertip coordinates. Column
// layout is (x_t, y_t, x_i, y_i, x_m, y_m, x_r, y_r, x_p, y_p); ground
// truth instances have all rows identical.
struct EnsemblePositionMatrix {
  std::array<double, kEnsembleSide * kEnsembleSide> values{};

  double& at(int row, int col) { return values[static_cast<size_t>(row) * kEnsembleSide + col]; }
  double at(int row, int col) const {
    return values[static_cast<size_t>(row) * kEnsembleSide + col];
  }

  // Builds the training target: one coordinate row stacked kEnsembleSide
  // times. `row` is (x_t, y_t, ..., x_p, y_p) in normalized-crop units.
  static EnsemblePositionMatrix stacked(const std::array<double, kEnsembleSide>& row);
};

enum class CoordinateFrame { normalized_crop, crop_pixels, image_pixels };

const char* frame_name(CoordinateFrame frame);
std::optional<CoordinateFrame> frame_from_name(const std::string& name);

// Up to five fingertip coordinates in a stated frame. A coordinate is
// present exactly when the corresponding visibility bit is 1.
struct FingertipSet {
  std::array<std::optional<std::array<double, 2>>, kNumFingers> coords{};
  CoordinateFrame frame = CoordinateFrame::image_pixels;

  std::optional<std::array<double, 2>>& operator[](FingerId f) {
    return coords[static_cast<int>(f)];
  }
  const std::optional<std::array<double, 2>>& operator[](FingerId f) const {
    return coords[static_cast<int>(f)];
  }

  int present_count() const;

  bool operator==(const FingertipSet&) const = default;
};

// Axis-aligned pixel box; bottom-right is exclusive, matching the slice
// crop image[y_tl:y_br, x_tl:x_br].
struct BoundingBox {
  int x_tl = 0;
  int y_tl = 0;
  int x_br = 0;
  int y_br = 0;

  int width() const { return x_br - x_tl; }
  int height() const { return y_br - y_tl; }

  bool contains(double x, double y) const {
    return x >= x_tl && x < x_br && y >= y_tl && y < y_br;
  }

  BoundingBox clipped(int image_width, int image_height) const;

  bool operator==(const BoundingBox&) const = default;
};

// One labeled example: full image, hand box, gesture identity and
// fingertip coordinates in image pixels.
struct AnnotatedSample {
  Image image;
  std::string image_name;  // relative path used on disk
  std::string gesture_class;
  BoundingBox bbox;
  GestureCode code;
  FingertipSet fingertips;  // image-pixels frame
};

// Metadata half of a sample; what the annotation JSONL stores.
struct AnnotationRecord {
  std::string image;  // relative path
  std::string gesture_class;
  BoundingBox bbox;
  GestureCode code;
  FingertipSet fingertips;

  bool operator==(const AnnotationRecord&) const = default;
};

AnnotationRecord record_of(const AnnotatedSample& sample);

std::string record_to_json_line(const AnnotationRecord& record);
// Throws DataError naming the offending field; `context` (e.g. a line
// number) is prefixed to the message.
AnnotationRecord record_from_json_line(const std::string& line, const std::string& context = {});

// Returns one human-readable violation per broken invariant; empty means
// the sample is well formed. Violations are data, not failures.
std::vector<std::string> validate_sample(const AnnotatedSample& sample);

// Same checks against a record plus the image dimensions, so datasets can
// be validated without decoding pixel payloads.
std::vector<std::string> validate_record(const AnnotationRecord& record, int image_width,
                                         int image_height);

// Final output of the detection pipeline: recognized code/class plus
// per-visible-finger coordinates in original-image pixels.
struct DetectionResult {
  GestureCode code;
  std::string gesture_class;  // registered name or "unknown"
  FingertipSet fingertips;    // image-pixels frame
  FingerProbabilities raw_probabilities;
};

std::string detection_to_json_line(const DetectionResult& result, const std::string& image);
DetectionResult detection_from_json_line(const std::string& line, std::string* image = nullptr);

}  // namespace unigest

#include "unigest/core.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "unigest/errors.hpp"

namespace unigest {

using nlohmann::json;

const char* finger_name(FingerId f) {
  switch (f) {
    case FingerId::thumb: return "thumb";
    case FingerId::index: return "index";
    case FingerId::middle: return "middle";
    case FingerId::ring: return "ring";
    case FingerId::pinky: return "pinky";
  }
  return "?";
}

std::string GestureCode::to_string() const {
  std::string s = "[";
  for (int i = 0; i < kNumFingers; ++i) {
    s += bits[i] ? '1' : '0';
    if (i + 1 < kNumFingers) s += ' ';
  }
  s += ']';
  return s;
}

EnsemblePositionMatrix EnsemblePositionMatrix::stacked(
    const std::array<double, kEnsembleSide>& row) {
  EnsemblePositionMatrix m;
  for (int r = 0; r < kEnsembleSide; ++r)
    for (int c = 0; c < kEnsembleSide; ++c) m.at(r, c) = row[c];
  return m;
}

const char* frame_name(CoordinateFrame frame) {
  switch (frame) {
    case CoordinateFrame::normalized_crop: return "normalized-crop";
    case CoordinateFrame::crop_pixels: return "crop-pixels";
    case CoordinateFrame::image_pixels: return "image-pixels";
  }
  return "?";
}

std::optional<CoordinateFrame> frame_from_name(const std::string& name) {
  if (name == "normalized-crop") return CoordinateFrame::normalized_crop;
  if (name == "crop-pixels") return CoordinateFrame::crop_pixels;
  if (name == "image-pixels") return CoordinateFrame::image_pixels;
  return std::nullopt;
}

int FingertipSet::present_count() const {
  int n = 0;
  for (const auto& c : coords) n += c.has_value() ? 1 : 0;
  return n;
}

BoundingBox BoundingBox::clipped(int image_width, int image_height) const {
  BoundingBox b = *this;
  b.x_tl = std::clamp(b.x_tl, 0, image_width);
  b.y_tl = std::clamp(b.y_tl, 0, image_height);
  b.x_br = std::clamp(b.x_br, 0, image_width);
  b.y_br = std::clamp(b.y_br, 0, image_height);
  return b;
}

AnnotationRecord record_of(const AnnotatedSample& sample) {
  AnnotationRecord r;
  r.image = sample.image_name;
  r.gesture_class = sample.gesture_class;
  r.bbox = sample.bbox;
  r.code = sample.code;
  r.fingertips = sample.fingertips;
  return r;
}

namespace {

json fingertips_to_json(const FingertipSet& tips) {
  json arr = json::array();
  for (const auto& c : tips.coords) {
    if (c.has_value())
      arr.push_back(json::array({(*c)[0], (*c)[1]}));
    else
      arr.push_back(nullptr);
  }
  return arr;
}

FingertipSet fingertips_from_json(const json& arr, const std::string& context) {
  if (!arr.is_array() || arr.size() != kNumFingers)
    throw DataError(context + "fingertips must be an array of 5 entries");
  FingertipSet tips;
  for (int i = 0; i < kNumFingers; ++i) {
    const json& e = arr[i];
    if (e.is_null()) continue;
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      throw DataError(context + "fingertip " + std::to_string(i) + " must be [x, y] or null");
    tips.coords[i] = std::array<double, 2>{e[0].get<double>(), e[1].get<double>()};
  }
  return tips;
}

}  // namespace

std::string record_to_json_line(const AnnotationRecord& record) {
  json j;
  j["image"] = record.image;
  j["class"] = record.gesture_class;
  j["bbox"] = {record.bbox.x_tl, record.bbox.y_tl, record.bbox.x_br, record.bbox.y_br};
  json vis = json::array();
  for (uint8_t b : record.code.bits) vis.push_back(static_cast<int>(b));
  j["visibility"] = vis;
  j["fingertips"] = fingertips_to_json(record.fingertips);
  return j.dump();
}

AnnotationRecord record_from_json_line(const std::string& line, const std::string& context) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(context + "invalid JSON: " + e.what());
  }
  AnnotationRecord r;
  try {
    r.image = j.at("image").get<std::string>();
    r.gesture_class = j.at("class").get<std::string>();
    const json& box = j.at("bbox");
    if (!box.is_array() || box.size() != 4)
      throw DataError(context + "bbox must be [x_tl, y_tl, x_br, y_br]");
    r.bbox = {box[0].get<int>(), box[1].get<int>(), box[2].get<int>(), box[3].get<int>()};
    const json& vis = j.at("visibility");
    if (!vis.is_array() || vis.size() != kNumFingers)
      throw DataError(context + "visibility must be an array of 5 bits");
    for (int i = 0; i < kNumFingers; ++i) {
      int v = vis[i].get<int>();
      if (v != 0 && v != 1) throw DataError(context + "visibility bits must be 0 or 1");
      r.code.bits[i] = static_cast<uint8_t>(v);
    }
    r.fingertips = fingertips_from_json(j.at("fingertips"), context);
  } catch (const json::exception& e) {
    throw DataError(context + "bad annotation record: " + e.what());
  }
  return r;
}

std::vector<std::string> validate_record(const AnnotationRecord& record, int image_width,
                                         int image_height) {
  std::vector<std::string> violations;
  const BoundingBox& b = record.bbox;
  if (b.x_tl >= b.x_br || b.y_tl >= b.y_br) violations.push_back("bbox: empty or inverted");
  if (b.x_tl < 0 || b.y_tl < 0 || b.x_br > image_width || b.y_br > image_height)
    violations.push_back("bbox: outside image bounds");
  if (record.fingertips.frame != CoordinateFrame::image_pixels)
    violations.push_back("fingertips: frame must be image-pixels");
  for (FingerId f : kAllFingers) {
    bool bit = record.code[f] != 0;
    const auto& coord = record.fingertips[f];
    if (bit != coord.has_value()) {
      violations.push_back(std::string("code/fingertip mismatch: ") + finger_name(f));
      continue;
    }
    if (coord.has_value()) {
      double x = (*coord)[0];
      double y = (*coord)[1];
      if (!std::isfinite(x) || !std::isfinite(y)) {
        violations.push_back(std::string("fingertip not finite: ") + finger_name(f));
      } else if (!b.contains(x, y)) {
        violations.push_back(std::string("fingertip outside bbox: ") + finger_name(f));
      }
    }
  }
  return violations;
}

std::vector<std::string> validate_sample(const AnnotatedSample& sample) {
  return validate_record(record_of(sample), sample.image.width, sample.image.height);
}

std::string detection_to_json_line(const DetectionResult& result, const std::string& image) {
  json j;
  j["image"] = image;
  j["class"] = result.gesture_class;
  json code = json::array();
  for (uint8_t b : result.code.bits) code.push_back(static_cast<int>(b));
  j["code"] = code;
  j["fingertips"] = fingertips_to_json(result.fingertips);
  json probs = json::array();
  for (double p : result.raw_probabilities.p) probs.push_back(p);
  j["probabilities"] = probs;
  j["frame"] = frame_name(result.fingertips.frame);
  return j.dump();
}

DetectionResult detection_from_json_line(const std::string& line, std::string* image) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
  DetectionResult r;
  try {
    if (image != nullptr) *image = j.at("image").get<std::string>();
    r.gesture_class = j.at("class").get<std::string>();
    const json& code = j.at("code");
    for (int i = 0; i < kNumFingers; ++i) r.code.bits[i] = static_cast<uint8_t>(code.at(i).get<int>());
    r.fingertips = fingertips_from_json(j.at("fingertips"), "");
    auto frame = frame_from_name(j.at("frame").get<std::string>());
    if (!frame) throw DataError("unknown coordinate frame");
    r.fingertips.frame = *frame;
    const json& probs = j.at("probabilities");
    for (int i = 0; i < kNumFingers; ++i) r.raw_probabilities.p[i] = probs.at(i).get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("bad detection record: ") + e.what());
  }
  return r;
}

}  // namespace unigest

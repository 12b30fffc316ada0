#include "unigest/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "unigest/errors.hpp"
#include "unigest/rng.hpp"

namespace unigest {

using nlohmann::json;

std::optional<BoundingBox> GroundTruthDetector::detect(const Image&, const std::string& image_id) {
  auto it = boxes_.find(image_id);
  if (it == boxes_.end()) return std::nullopt;
  return it->second;
}

FileBoxDetector FileBoxDetector::from_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open box file: " + path.string());
  FileBoxDetector detector;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string context = path.string() + ":" + std::to_string(line_no) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(context + "invalid JSON: " + e.what());
    }
    try {
      const json& box = j.at("bbox");
      if (!box.is_array() || box.size() != 4)
        throw DataError(context + "bbox must be [x_tl, y_tl, x_br, y_br]");
      detector.boxes_[j.at("image").get<std::string>()] = BoundingBox{
          box[0].get<int>(), box[1].get<int>(), box[2].get<int>(), box[3].get<int>()};
    } catch (const json::exception& e) {
      throw DataError(context + "bad box record: " + e.what());
    }
  }
  return detector;
}

std::optional<BoundingBox> FileBoxDetector::detect(const Image&, const std::string& image_id) {
  auto it = boxes_.find(image_id);
  if (it == boxes_.end()) return std::nullopt;
  return it->second;
}

std::array<double, kEnsembleSide> ensemble_average(const EnsemblePositionMatrix& m) {
  std::array<double, kEnsembleSide> out{};
  for (int col = 0; col < kEnsembleSide; ++col) {
    std::array<double, kEnsembleSide> column;
    for (int row = 0; row < kEnsembleSide; ++row) column[row] = m.at(row, col);
    // Canonical summation order: permuting rows cannot change the result.
    std::sort(column.begin(), column.end());
    double acc = 0.0;
    for (double v : column) acc += v;
    out[col] = acc / kEnsembleSide;
  }
  return out;
}

Crop crop_and_resize(const Image& image, const BoundingBox& bbox, int out_size) {
  if (out_size < 1) throw InputError("crop output size must be positive");
  BoundingBox box = bbox.clipped(image.width, image.height);
  const int w = box.width();
  const int h = box.height();
  if (w <= 0 || h <= 0)
    throw InputError("degenerate crop box [" + std::to_string(bbox.x_tl) + "," +
                     std::to_string(bbox.y_tl) + "," + std::to_string(bbox.x_br) + "," +
                     std::to_string(bbox.y_br) + "]");
  Crop crop;
  crop.box = box;
  crop.image = Image(out_size, out_size);
  const double sx = static_cast<double>(w) / out_size;
  const double sy = static_cast<double>(h) / out_size;
  for (int oy = 0; oy < out_size; ++oy) {
    const double fy =
        std::clamp(box.y_tl + (oy + 0.5) * sy - 0.5, static_cast<double>(box.y_tl),
                   static_cast<double>(box.y_br - 1));
    for (int ox = 0; ox < out_size; ++ox) {
      const double fx =
          std::clamp(box.x_tl + (ox + 0.5) * sx - 0.5, static_cast<double>(box.x_tl),
                     static_cast<double>(box.x_br - 1));
      uint8_t* px = crop.image.px(ox, oy);
      for (int ch = 0; ch < 3; ++ch) {
        double v = sample_bilinear(image, fx, fy, ch);
        px[ch] = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return crop;
}

void copy_into_batch(const Image& crop, Tensor& batch, int batch_index) {
  const int s = batch.dim(2);
  if (crop.width != s || crop.height != s || batch.dim(3) != s || batch.dim(1) != 3)
    throw InputError("crop size does not match batch shape " + batch.shape_string());
  double* base = batch.data() + static_cast<int64_t>(batch_index) * 3 * s * s;
  for (int ch = 0; ch < 3; ++ch)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        base[(static_cast<int64_t>(ch) * s + y) * s + x] = crop.px(x, y)[ch] / 255.0;
}

Tensor to_input_tensor(const Image& crop) {
  Tensor batch({1, 3, crop.height, crop.width});
  copy_into_batch(crop, batch, 0);
  return batch;
}

std::array<double, 2> to_image_pixels(const std::array<double, 2>& normalized,
                                      const BoundingBox& box) {
  return {normalized[0] * box.width() + box.x_tl, normalized[1] * box.height() + box.y_tl};
}

std::array<double, 2> to_normalized(const std::array<double, 2>& image_px,
                                    const BoundingBox& box) {
  return {(image_px[0] - box.x_tl) / box.width(), (image_px[1] - box.y_tl) / box.height()};
}

FingerProbabilities probabilities_from_output(const Tensor& probabilities, int batch_index) {
  FingerProbabilities p;
  for (int i = 0; i < kNumFingers; ++i)
    p.p[i] = probabilities[static_cast<int64_t>(batch_index) * kNumFingers + i];
  return p;
}

EnsemblePositionMatrix ensemble_from_output(const Tensor& positions, int batch_index) {
  EnsemblePositionMatrix m;
  const int64_t offset = static_cast<int64_t>(batch_index) * kEnsembleSide * kEnsembleSide;
  for (int i = 0; i < kEnsembleSide * kEnsembleSide; ++i) m.values[i] = positions[offset + i];
  return m;
}

DetectionResult assemble_result(const FingerProbabilities& probs,
                                const std::array<double, kEnsembleSide>& normalized_coords,
                                const BoundingBox& box, Threshold tau,
                                const GestureRegistry& registry) {
  DetectionResult result;
  result.raw_probabilities = probs;
  result.code = binarize(probs, tau);
  result.gesture_class = classify(result.code, registry);
  result.fingertips.frame = CoordinateFrame::image_pixels;
  for (int f = 0; f < kNumFingers; ++f) {
    if (result.code.bits[f] == 0) continue;  // hidden fingers carry no coordinate
    const std::array<double, 2> normalized{normalized_coords[2 * f],
                                           normalized_coords[2 * f + 1]};
    result.fingertips.coords[f] = to_image_pixels(normalized, box);
  }
  return result;
}

namespace {

std::array<double, kEnsembleSide> finalize_coordinates(const ForwardResult& out,
                                                       const PostProcess& post) {
  std::array<double, kEnsembleSide> coords{};
  switch (post.mode) {
    case PostProcess::Mode::ensemble_mean:
      return ensemble_average(ensemble_from_output(out.positions, 0));
    case PostProcess::Mode::network_average:
      if (out.averaged.size() == 0)
        throw InputError("network_average post-processing needs average_in_network weights");
      for (int i = 0; i < kEnsembleSide; ++i) coords[i] = out.averaged[i];
      return coords;
    case PostProcess::Mode::random_row: {
      Rng rng({post.row_seed, post.row_counter++});
      const int row = rng.uniform_int(kEnsembleSide);
      const EnsemblePositionMatrix m = ensemble_from_output(out.positions, 0);
      for (int i = 0; i < kEnsembleSide; ++i) coords[i] = m.at(row, i);
      return coords;
    }
    case PostProcess::Mode::direct:
      if (out.positions.rank() != 2)
        throw InputError("direct post-processing needs a direct regression head");
      for (int i = 0; i < kEnsembleSide; ++i) coords[i] = out.positions[i];
      return coords;
  }
  return coords;
}

}  // namespace

std::optional<DetectionResult> detect(const Image& image, const std::string& image_id,
                                      HandDetector& detector, const NetworkWeights& weights,
                                      const GestureRegistry& registry, Threshold tau,
                                      const PostProcess& post) {
  std::optional<BoundingBox> box = detector.detect(image, image_id);
  if (!box) return std::nullopt;
  const BoundingBox clipped = box->clipped(image.width, image.height);
  if (clipped.width() <= 0 || clipped.height() <= 0) return std::nullopt;  // box clipped away

  const Crop crop = crop_and_resize(image, clipped, weights.config.input_size);
  const Tensor batch = to_input_tensor(crop.image);
  const ForwardResult out = forward(weights, batch, /*train_mode=*/false);
  const FingerProbabilities probs = probabilities_from_output(out.probabilities, 0);
  const std::array<double, kEnsembleSide> coords = finalize_coordinates(out, post);
  return assemble_result(probs, coords, crop.box, tau, registry);
}

std::vector<std::optional<DetectionResult>> detect_batch(
    const std::vector<const Image*>& images, const std::vector<std::string>& image_ids,
    HandDetector& detector, const NetworkWeights& weights, const GestureRegistry& registry,
    Threshold tau, const PostProcess& post) {
  if (images.size() != image_ids.size())
    throw InputError("detect_batch: image and id counts differ");
  std::vector<std::optional<DetectionResult>> results(images.size());
  for (size_t i = 0; i < images.size(); ++i)
    results[i] = detect(*images[i], image_ids[i], detector, weights, registry, tau, post);
  return results;
}

}  // namespace unigest

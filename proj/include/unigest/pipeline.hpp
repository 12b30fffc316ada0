#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "unigest/core.hpp"
#include "unigest/gesture_codec.hpp"
#include "unigest/model.hpp"

namespace unigest {

// Hand localization is an external concern; adapters provide boxes from
// ground-truth annotations or from precomputed detector output files.
// `image_id` identifies the frame for lookup-based adapters.
class HandDetector {
 public:
  virtual ~HandDetector() = default;
  virtual std::optional<BoundingBox> detect(const Image& image, const std::string& image_id) = 0;
};

// Looks up the annotated box per image id (the GT evaluation mode).
class GroundTruthDetector : public HandDetector {
 public:
  void add(const std::string& image_id, const BoundingBox& box) { boxes_[image_id] = box; }
  std::optional<BoundingBox> detect(const Image& image, const std::string& image_id) override;

 private:
  std::unordered_map<std::string, BoundingBox> boxes_;
};

// Reads precomputed boxes from a JSON-lines file of
// {"image": path, "bbox": [x_tl, y_tl, x_br, y_br]} records.
class FileBoxDetector : public HandDetector {
 public:
  static FileBoxDetector from_jsonl(const std::filesystem::path& path);
  void add(const std::string& image_id, const BoundingBox& box) { boxes_[image_id] = box; }
  std::optional<BoundingBox> detect(const Image& image, const std::string& image_id) override;

 private:
  std::unordered_map<std::string, BoundingBox> boxes_;
};

// Column-wise mean of the ensemble matrix. Each column's values are
// sorted before accumulation so the result is bitwise invariant under
// row permutations.
std::array<double, kEnsembleSide> ensemble_average(const EnsemblePositionMatrix& m);

struct Crop {
  Image image;      // out_size x out_size bilinear resample of the box region
  BoundingBox box;  // source region actually used (after clipping)
};

// Bilinear crop-resize; records the source geometry needed for the
// coordinate back-transform. Throws InputError on a degenerate box.
Crop crop_and_resize(const Image& image, const BoundingBox& bbox, int out_size);

// Pixel values scaled to [0, 1], laid out 3 x S x S.
void copy_into_batch(const Image& crop, Tensor& batch, int batch_index);
Tensor to_input_tensor(const Image& crop);  // batch of one

// Normalized-crop <-> image-pixels coordinate transforms for a fixed box.
std::array<double, 2> to_image_pixels(const std::array<double, 2>& normalized,
                                      const BoundingBox& box);
std::array<double, 2> to_normalized(const std::array<double, 2>& image_px,
                                    const BoundingBox& box);

// How the final 10 coordinates are produced from the network output.
struct PostProcess {
  enum class Mode {
    ensemble_mean,    // column-wise ensemble average (the standard path)
    network_average,  // network already averaged (averaging layer inside)
    random_row,       // one ensemble row, sampled per detection
    direct            // regression head already emits 10 coordinates
  };
  Mode mode = Mode::ensemble_mean;
  uint64_t row_seed = 0;  // stream seed for random_row
  mutable uint64_t row_counter = 0;
};

FingerProbabilities probabilities_from_output(const Tensor& probabilities, int batch_index);
EnsemblePositionMatrix ensemble_from_output(const Tensor& positions, int batch_index);

// Thresholds the probabilities into a code, classifies it, and maps the
// normalized coordinates of visible fingers back to original-image
// pixels; hidden fingers carry no coordinates.
DetectionResult assemble_result(const FingerProbabilities& probs,
                                const std::array<double, kEnsembleSide>& normalized_coords,
                                const BoundingBox& box, Threshold tau,
                                const GestureRegistry& registry);

// Full detection pass: localization, crop/resize, forward, thresholding
// and ensemble averaging, coordinate back-transform. Returns nothing when
// the detector finds no hand (or the box clips to nothing).
std::optional<DetectionResult> detect(const Image& image, const std::string& image_id,
                                      HandDetector& detector, const NetworkWeights& weights,
                                      const GestureRegistry& registry, Threshold tau = {},
                                      const PostProcess& post = {});

// Batch API; images are processed independently.
std::vector<std::optional<DetectionResult>> detect_batch(
    const std::vector<const Image*>& images, const std::vector<std::string>& image_ids,
    HandDetector& detector, const NetworkWeights& weights, const GestureRegistry& registry,
    Threshold tau = {}, const PostProcess& post = {});

}  // namespace unigest

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "unigest/core.hpp"
#include "unigest/model.hpp"
#include "unigest/rng.hpp"
#include "unigest/tensor.hpp"

namespace unigest {

// Per-sample finger visibility, broadcast over the two coordinate columns
// of each finger across all ensemble rows of the positional loss.
struct VisibilityMask {
  std::array<uint8_t, kNumFingers> finger_visible{};

  static VisibilityMask from_code(const GestureCode& code) {
    VisibilityMask m;
    m.finger_visible = code.bits;
    return m;
  }

  bool column_visible(int col) const { return finger_visible[col / 2] != 0; }
};

// Predictions are clamped to this range before the logarithms; the cross
// entropy is undefined at exactly 0 or 1.
inline constexpr double kBceClamp = 1e-7;

// Mean binary cross entropy over all elements of truth/pred (M x N).
// Truth entries are 0/1; predictions are sigmoid outputs.
double probabilistic_loss(const Tensor& truth, const Tensor& pred);
Tensor probabilistic_loss_grad(const Tensor& truth, const Tensor& pred);

// Masked mean squared error over the coordinate output. Accepts
// M x R x 2N (R ensemble rows) or M x 2N (single row); hidden-finger
// columns are skipped. The denominator is the fixed M * R * 2N of the
// full output, not the visible count (renormalize_by_visible opts into
// dividing by the masked element count instead).
double positional_loss(const Tensor& truth, const Tensor& pred,
                       const std::vector<VisibilityMask>& masks,
                       bool renormalize_by_visible = false);
Tensor positional_loss_grad(const Tensor& truth, const Tensor& pred,
                            const std::vector<VisibilityMask>& masks,
                            bool renormalize_by_visible = false);

double total_loss(double probabilistic, double positional);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-10;
  double lr = 1e-5;
  // The update uses the raw moments. Standard bias correction
  // (m / (1 - beta1^k), v / (1 - beta2^k)) is available behind this flag.
  bool bias_correction = false;
};

struct OptimizerState {
  AdamConfig config;
  int64_t step = 0;  // completed updates
  std::vector<NamedTensor> m;
  std::vector<NamedTensor> v;

  static OptimizerState init(const NetworkWeights& weights, const AdamConfig& config);
};

// One ADAM update in place. Throws TrainError naming the step on a
// non-finite gradient.
void adam_step(NetworkWeights& weights, const Gradients& grads, OptimizerState& state);

// 2x2 affine map p' = m * (p) + t used for keypoint-consistent geometry.
struct AffineTransform {
  std::array<double, 4> m{1.0, 0.0, 0.0, 1.0};  // row-major
  std::array<double, 2> t{0.0, 0.0};

  std::array<double, 2> apply(const std::array<double, 2>& p) const {
    return {m[0] * p[0] + m[1] * p[1] + t[0], m[2] * p[0] + m[3] * p[1] + t[1]};
  }

  // Rotation (degrees), x-shear (degrees) and isotropic scale about
  // `center`, then translation.
  static AffineTransform about_center(const std::array<double, 2>& center, double rotation_deg,
                                      double shear_deg, double scale,
                                      const std::array<double, 2>& translation);

  AffineTransform inverse() const;
};

// Applies the transform to image, bounding box (axis-aligned envelope of
// the mapped corners, clipped to the canvas) and fingertip coordinates.
// The visibility code is untouched.
AnnotatedSample apply_geometric(const AnnotatedSample& sample, const AffineTransform& transform);

struct AugmentationConfig {
  bool enabled = true;
  double max_rotation_deg = 15.0;
  double max_translation_frac = 0.10;  // of box width/height
  double max_shear_deg = 10.0;
  double min_scale = 0.9;
  double max_scale = 1.1;
  double max_brightness_delta = 0.25;  // multiplicative, +-
  double gaussian_sigma = 0.02;        // fraction of full intensity scale
  double salt_fraction = 0.01;         // max fraction of pixels
  bool geometric = true;
  bool illumination = true;
  bool gaussian_noise = true;
  bool salt_noise = true;
  int max_attempts = 10;
};

// Randomized augmentation. Geometry that would move a visible fingertip
// outside the (clipped) box is rejected and resampled up to max_attempts
// times, then falls back to identity geometry. Noise and illumination
// never touch coordinates.
AnnotatedSample augment(const AnnotatedSample& sample, const AugmentationConfig& config,
                        Rng& rng);

struct LrStep {
  int until_epoch;  // inclusive
  double lr;
};

struct TrainConfig {
  int batch_size = 64;
  int epochs = 300;
  // Stepwise schedule; epochs past the last entry keep its rate.
  std::vector<LrStep> lr_schedule{{150, 1e-5}, {250, 1e-6}, {300, 1e-7}};
  AdamConfig adam;  // lr field is driven by the schedule
  AugmentationConfig augmentation;
  uint64_t seed = 0;
  int max_steps = 0;  // 0 = no cap; otherwise stop after this many updates
  int checkpoint_interval = 0;  // epochs; 0 disables
  std::filesystem::path checkpoint_dir;
  bool renormalize_positional_by_visible = false;
  bool verbose = false;
};

double lr_for_epoch(const TrainConfig& config, int epoch);

struct EpochStats {
  double probabilistic = 0.0;
  double positional = 0.0;
  double total = 0.0;
};

struct HistoryRow {
  int epoch = 0;
  EpochStats train;
  EpochStats val;
};

using History = std::vector<HistoryRow>;

void write_history_csv(const History& history, const std::filesystem::path& path);
History read_history_csv(const std::filesystem::path& path);

// Lazy sample access so corpora never have to fit in memory.
struct TrainData {
  size_t count = 0;
  std::function<AnnotatedSample(size_t)> get;

  static TrainData from_samples(const std::vector<AnnotatedSample>& samples);
};

// Network input plus the two training targets for one sample.
struct PreparedSample {
  Tensor input;  // 3 x S x S in [0, 1]
  std::array<double, kNumFingers> prob_target{};
  std::array<double, kEnsembleSide> coord_row{};  // normalized-crop GT
  VisibilityMask mask;
};

PreparedSample prepare_sample(const AnnotatedSample& sample, int input_size);

struct TrainResult {
  NetworkWeights weights;
  History history;
  std::optional<int64_t> diverged_at_step;  // set when training aborted
};

// Full training loop: seeded shuffling, per-(epoch, sample) augmentation
// streams, joint loss, ADAM updates, per-epoch train/validation stats and
// optional periodic checkpoints. Deterministic per seed.
TrainResult train(const TrainData& train_set, const TrainData& val_set,
                  const TrainConfig& config, const NetworkConfig& network_config);

}  // namespace unigest

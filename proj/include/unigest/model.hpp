#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "unigest/core.hpp"
#include "unigest/rng.hpp"
#include "unigest/tensor.hpp"

namespace unigest {

// One backbone stage: `convs` 3x3 same-padding convolutions at `channels`
// width, each followed by ReLU, with a 2x2 max pool closing the stage.
struct ConvStageSpec {
  int convs = 0;
  int channels = 0;
  bool operator==(const ConvStageSpec&) const = default;
};

enum class UpsampleMode { nearest, bilinear };
enum class RegressionHead {
  ensemble_conv,  // upsample + single-filter conv -> 10x10 ensemble, linear
  direct_fc       // flatten -> FC(10) with sigmoid, no ensemble
};

// Geometry of the dual-head network. The default is the full-size model:
// VGG-16 feature stage on a 128x128x3 crop producing 4x4x512, two
// dropout-regularized FC layers of width 1024 feeding a 5-way sigmoid
// probability head, and a 3x upsample + 3x3 valid convolution regression
// head producing the 10x10 ensemble of fingertip coordinates.
struct NetworkConfig {
  int input_size = 128;
  std::vector<ConvStageSpec> stages = {{2, 64}, {2, 128}, {3, 256}, {3, 512}, {3, 512}};
  int fc_width = 1024;
  double dropout_rate = 0.5;
  int prob_outputs = kNumFingers;
  int upsample_factor = 3;
  int reg_kernel = 3;
  UpsampleMode upsample_mode = UpsampleMode::nearest;
  RegressionHead regression_head = RegressionHead::ensemble_conv;
  // Moves the column-wise ensemble average inside the network as a
  // parameter-free pooling layer; post-processing then skips averaging.
  bool average_in_network = false;

  static NetworkConfig vgg16() { return NetworkConfig{}; }

  // Reduced geometry for CPU-feasible gradient checks: 32x32 input with
  // every channel width divided by 8. The feature map is 1x1, so the
  // upsample factor grows to keep the 10x10 ensemble shape.
  static NetworkConfig shrunken();

  // Small but spatially faithful geometry for desk-scale training runs:
  // 32x32 input, three stages, 4x4 feature map like the full model.
  static NetworkConfig compact();

  int num_convs() const;
  int feature_spatial() const;  // input_size / 2^stages
  int feature_channels() const { return stages.empty() ? 0 : stages.back().channels; }
  int flatten_width() const { return feature_spatial() * feature_spatial() * feature_channels(); }
  int upsampled_spatial() const { return feature_spatial() * upsample_factor; }

  // Throws ConfigError naming the violated relation.
  void validate() const;

  bool operator==(const NetworkConfig&) const = default;
};

int64_t parameter_count(const NetworkConfig& config);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct NetworkWeights {
  NetworkConfig config;
  std::vector<NamedTensor> arrays;  // fixed build order

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const;
  int64_t parameter_count() const;
};

// Seeded random initialization: He-normal for ReLU layers, Glorot-normal
// for the two output layers. Identical seeds produce identical weights.
NetworkWeights build(const NetworkConfig& config, uint64_t seed);

// Copies all feature-stage arrays ("features.*") from src into dst; the
// hook for starting from pretrained backbone weights. Heads are left
// untouched. Throws DataError on missing arrays or shape mismatch.
void load_backbone(NetworkWeights& dst, const NetworkWeights& src);

struct ForwardResult {
  Tensor probabilities;  // B x 5, sigmoid output
  // ensemble_conv head: B x 10 x 10 linear ensemble output;
  // direct_fc head: B x 10 sigmoid output.
  Tensor positions;
  // Column means of the ensemble (B x 10) when average_in_network is set;
  // empty otherwise.
  Tensor averaged;
};

// Intermediates retained by forward_traced for the backward pass.
struct ForwardTrace {
  bool train_mode = false;
  Tensor input;
  std::vector<Tensor> conv_inputs;   // input of every convolution, in order
  std::vector<Tensor> conv_preact;   // pre-ReLU outputs
  std::vector<Tensor> pool_inputs;   // post-ReLU maps entering each pool
  std::vector<Tensor> pool_outputs;
  std::vector<std::vector<int32_t>> pool_argmax;
  Tensor flat;
  Tensor fc1_pre, fc1_act, fc1_drop, drop1_mask;
  Tensor fc2_pre, fc2_act, fc2_drop, drop2_mask;
  Tensor prob_pre;
  Tensor ups_out, ups_act;  // regression branch (ensemble head)
  ForwardResult result;
};

// Pure forward evaluation. Dropout is active only in train mode and draws
// masks from `dropout_rng`; eval mode is deterministic for equal inputs.
ForwardResult forward(const NetworkWeights& weights, const Tensor& batch, bool train_mode = false,
                      Rng* dropout_rng = nullptr);

ForwardResult forward_traced(const NetworkWeights& weights, const Tensor& batch, bool train_mode,
                             Rng* dropout_rng, ForwardTrace& trace);

struct Gradients {
  std::vector<NamedTensor> arrays;  // same order and shapes as the weights
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
};

// dprob is dL/d(probabilities); dpos is dL/d(positions) in the head's
// output shape. Chains through the sigmoid internally.
Gradients backward(const NetworkWeights& weights, const ForwardTrace& trace, const Tensor& dprob,
                   const Tensor& dpos);

// Checkpoint: JSON manifest (config, array names and shapes, FNV-1a
// checksum) followed by the raw little-endian doubles. Round-trips
// bit-exactly.
void save_checkpoint(const NetworkWeights& weights, const std::filesystem::path& path);
NetworkWeights load_checkpoint(const std::filesystem::path& path);

uint64_t fnv1a64(const void* data, size_t size, uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace unigest

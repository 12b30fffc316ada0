#include "unigest/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "unigest/errors.hpp"
#include "unigest/kernels.hpp"

namespace unigest {

using nlohmann::json;

NetworkConfig NetworkConfig::shrunken() {
  NetworkConfig c;
  c.input_size = 32;
  c.stages = {{2, 8}, {2, 16}, {3, 32}, {3, 64}, {3, 64}};
  c.fc_width = 128;
  c.upsample_factor = 12;  // 1x1 feature map -> 12x12 -> 10x10
  return c;
}

NetworkConfig NetworkConfig::compact() {
  NetworkConfig c;
  c.input_size = 32;
  c.stages = {{2, 8}, {2, 16}, {3, 32}};
  c.fc_width = 128;
  c.upsample_factor = 3;  // 4x4 feature map, same head geometry as full size
  return c;
}

int NetworkConfig::num_convs() const {
  int n = 0;
  for (const auto& s : stages) n += s.convs;
  return n;
}

int NetworkConfig::feature_spatial() const {
  int s = input_size;
  for (size_t i = 0; i < stages.size(); ++i) s /= 2;
  return s;
}

void NetworkConfig::validate() const {
  if (input_size <= 0) throw ConfigError("input_size must be positive");
  if (stages.empty()) throw ConfigError("at least one convolution stage is required");
  for (const auto& s : stages)
    if (s.convs < 1 || s.channels < 1)
      throw ConfigError("every stage needs at least one convolution and one channel");
  int spatial = input_size;
  for (size_t i = 0; i < stages.size(); ++i) {
    if (spatial % 2 != 0)
      throw ConfigError("input_size " + std::to_string(input_size) + " is not divisible by 2^" +
                        std::to_string(stages.size()) + " (stage " + std::to_string(i + 1) +
                        " pools an odd size)");
    spatial /= 2;
  }
  if (spatial < 1) throw ConfigError("feature map collapsed below 1x1");
  if (fc_width < 1) throw ConfigError("fc_width must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout_rate must be in [0, 1)");
  if (prob_outputs != kNumFingers)
    throw ConfigError("probability head must have " + std::to_string(kNumFingers) + " outputs");
  if (regression_head == RegressionHead::ensemble_conv) {
    if (upsample_factor < 1) throw ConfigError("upsample_factor must be positive");
    if (reg_kernel < 1) throw ConfigError("reg_kernel must be positive");
    int ups = spatial * upsample_factor;
    int out = ups - reg_kernel + 1;
    if (out != kEnsembleSide)
      throw ConfigError("regression head shape: upsampled " + std::to_string(ups) + "x" +
                        std::to_string(ups) + " minus kernel " + std::to_string(reg_kernel) +
                        " plus 1 gives " + std::to_string(out) + ", must equal ensemble side " +
                        std::to_string(kEnsembleSide));
  }
}

int64_t parameter_count(const NetworkConfig& config) {
  int64_t total = 0;
  int prev = 3;
  for (const auto& s : config.stages) {
    for (int i = 0; i < s.convs; ++i) {
      total += static_cast<int64_t>(s.channels) * prev * 9 + s.channels;
      prev = s.channels;
    }
  }
  const int64_t flat = config.flatten_width();
  total += static_cast<int64_t>(config.fc_width) * flat + config.fc_width;
  total += static_cast<int64_t>(config.fc_width) * config.fc_width + config.fc_width;
  total += static_cast<int64_t>(config.prob_outputs) * config.fc_width + config.prob_outputs;
  if (config.regression_head == RegressionHead::ensemble_conv) {
    total += static_cast<int64_t>(config.feature_channels()) * config.reg_kernel *
                 config.reg_kernel +
             1;
  } else {
    total += static_cast<int64_t>(kEnsembleSide) * flat + kEnsembleSide;
  }
  return total;
}

Tensor& NetworkWeights::at(const std::string& name) {
  for (auto& a : arrays)
    if (a.name == name) return a.tensor;
  throw InputError("no weight array named " + name);
}

const Tensor& NetworkWeights::at(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a.tensor;
  throw InputError("no weight array named " + name);
}

bool NetworkWeights::has(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return true;
  return false;
}

int64_t NetworkWeights::parameter_count() const {
  int64_t total = 0;
  for (const auto& a : arrays) total += a.tensor.size();
  return total;
}

Tensor& Gradients::at(const std::string& name) {
  for (auto& a : arrays)
    if (a.name == name) return a.tensor;
  throw InputError("no gradient array named " + name);
}

const Tensor& Gradients::at(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a.tensor;
  throw InputError("no gradient array named " + name);
}

namespace {

std::string conv_name(int stage, int idx) {
  return "features.s" + std::to_string(stage + 1) + ".conv" + std::to_string(idx + 1);
}

void fill_gaussian(Tensor& t, double stddev, Rng& rng) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian() * stddev;
}

}  // namespace

NetworkWeights build(const NetworkConfig& config, uint64_t seed) {
  config.validate();
  NetworkWeights w;
  w.config = config;
  Rng rng({seed, 0x6275696c64ULL});  // "build"

  auto add = [&w](const std::string& name, Tensor t) {
    w.arrays.push_back({name, std::move(t)});
  };

  int prev = 3;
  for (size_t s = 0; s < config.stages.size(); ++s) {
    for (int i = 0; i < config.stages[s].convs; ++i) {
      const int ch = config.stages[s].channels;
      Tensor weight({ch, prev, 3, 3});
      fill_gaussian(weight, std::sqrt(2.0 / (prev * 9)), rng);  // He init for ReLU
      add(conv_name(static_cast<int>(s), i) + ".weight", std::move(weight));
      add(conv_name(static_cast<int>(s), i) + ".bias", Tensor({ch}));
      prev = ch;
    }
  }

  const int flat = config.flatten_width();
  Tensor fc1({config.fc_width, flat});
  fill_gaussian(fc1, std::sqrt(2.0 / flat), rng);
  add("fc1.weight", std::move(fc1));
  add("fc1.bias", Tensor({config.fc_width}));

  Tensor fc2({config.fc_width, config.fc_width});
  fill_gaussian(fc2, std::sqrt(2.0 / config.fc_width), rng);
  add("fc2.weight", std::move(fc2));
  add("fc2.bias", Tensor({config.fc_width}));

  Tensor prob({config.prob_outputs, config.fc_width});
  fill_gaussian(prob, std::sqrt(2.0 / (config.fc_width + config.prob_outputs)), rng);
  add("prob.weight", std::move(prob));
  add("prob.bias", Tensor({config.prob_outputs}));

  if (config.regression_head == RegressionHead::ensemble_conv) {
    const int c = config.feature_channels();
    const int k = config.reg_kernel;
    Tensor reg({1, c, k, k});
    fill_gaussian(reg, std::sqrt(2.0 / (c * k * k + 1)), rng);
    add("reg.weight", std::move(reg));
    // Linear head over normalized coordinates: start centered in [0, 1].
    Tensor reg_bias({1});
    reg_bias.fill(0.5);
    add("reg.bias", std::move(reg_bias));
  } else {
    Tensor reg({kEnsembleSide, flat});
    fill_gaussian(reg, std::sqrt(2.0 / (flat + kEnsembleSide)), rng);
    add("reg_fc.weight", std::move(reg));
    add("reg_fc.bias", Tensor({kEnsembleSide}));
  }
  return w;
}

void load_backbone(NetworkWeights& dst, const NetworkWeights& src) {
  for (auto& a : dst.arrays) {
    if (a.name.rfind("features.", 0) != 0) continue;
    if (!src.has(a.name)) throw DataError("backbone source misses array " + a.name);
    const Tensor& from = src.at(a.name);
    if (!from.same_shape(a.tensor))
      throw DataError("backbone array " + a.name + " has shape " + from.shape_string() +
                      ", expected " + a.tensor.shape_string());
    a.tensor = from;
  }
}

namespace {

struct DropoutResult {
  Tensor out;
  Tensor mask;  // per-element keep multiplier; empty in eval mode
};

DropoutResult apply_dropout(const Tensor& in, double rate, bool train_mode, Rng* rng) {
  DropoutResult r;
  if (!train_mode || rate <= 0.0) {
    r.out = in;
    return r;
  }
  if (rng == nullptr) throw InputError("train-mode forward with dropout requires an rng");
  r.mask = Tensor(in.shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (int64_t i = 0; i < in.size(); ++i) r.mask[i] = rng->uniform() >= rate ? keep_scale : 0.0;
  r.out = Tensor(in.shape());
  for (int64_t i = 0; i < in.size(); ++i) r.out[i] = in[i] * r.mask[i];
  return r;
}

ForwardResult run_forward(const NetworkWeights& weights, const Tensor& batch, bool train_mode,
                          Rng* rng, ForwardTrace* trace) {
  const NetworkConfig& cfg = weights.config;
  if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != cfg.input_size ||
      batch.dim(3) != cfg.input_size)
    throw InputError("forward expects a Bx3x" + std::to_string(cfg.input_size) + "x" +
                     std::to_string(cfg.input_size) + " batch, got " + batch.shape_string());
  const int b = batch.dim(0);

  if (trace != nullptr) {
    trace->train_mode = train_mode;
    trace->input = batch;
    trace->conv_inputs.clear();
    trace->conv_preact.clear();
    trace->pool_inputs.clear();
    trace->pool_outputs.clear();
    trace->pool_argmax.clear();
  }

  // Center the [0, 1] pixel values before the first convolution.
  Tensor cur = batch;
  for (int64_t i = 0; i < cur.size(); ++i) cur[i] -= 0.5;
  int ch_in = 3;
  int spatial = cfg.input_size;
  for (size_t s = 0; s < cfg.stages.size(); ++s) {
    const int ch = cfg.stages[s].channels;
    for (int i = 0; i < cfg.stages[s].convs; ++i) {
      const std::string name = conv_name(static_cast<int>(s), i);
      Tensor pre({b, ch, spatial, spatial});
      kernels::conv2d_forward(cur.data(), b, ch_in, spatial, spatial,
                              weights.at(name + ".weight").data(),
                              weights.at(name + ".bias").data(), ch, 3, 1, pre.data());
      Tensor act({b, ch, spatial, spatial});
      kernels::relu_forward(pre.data(), pre.size(), act.data());
      if (trace != nullptr) {
        trace->conv_inputs.push_back(std::move(cur));
        trace->conv_preact.push_back(std::move(pre));
      }
      cur = std::move(act);
      ch_in = ch;
    }
    Tensor pooled({b, ch, spatial / 2, spatial / 2});
    std::vector<int32_t> argmax(static_cast<size_t>(pooled.size()));
    kernels::maxpool2_forward(cur.data(), b, ch, spatial, spatial, pooled.data(), argmax.data());
    if (trace != nullptr) {
      trace->pool_inputs.push_back(std::move(cur));
      trace->pool_outputs.push_back(pooled);
      trace->pool_argmax.push_back(std::move(argmax));
    }
    cur = std::move(pooled);
    spatial /= 2;
  }

  // cur: b x C x F x F feature maps, shared by both heads.
  const Tensor features = std::move(cur);
  const int flat_width = cfg.flatten_width();
  Tensor flat({b, flat_width});
  std::memcpy(flat.data(), features.data(), sizeof(double) * static_cast<size_t>(flat.size()));

  // Probability head.
  Tensor fc1_pre({b, cfg.fc_width});
  kernels::fc_forward(flat.data(), b, flat_width, weights.at("fc1.weight").data(),
                      weights.at("fc1.bias").data(), cfg.fc_width, fc1_pre.data());
  Tensor fc1_act({b, cfg.fc_width});
  kernels::relu_forward(fc1_pre.data(), fc1_pre.size(), fc1_act.data());
  DropoutResult drop1 = apply_dropout(fc1_act, cfg.dropout_rate, train_mode, rng);

  Tensor fc2_pre({b, cfg.fc_width});
  kernels::fc_forward(drop1.out.data(), b, cfg.fc_width, weights.at("fc2.weight").data(),
                      weights.at("fc2.bias").data(), cfg.fc_width, fc2_pre.data());
  Tensor fc2_act({b, cfg.fc_width});
  kernels::relu_forward(fc2_pre.data(), fc2_pre.size(), fc2_act.data());
  DropoutResult drop2 = apply_dropout(fc2_act, cfg.dropout_rate, train_mode, rng);

  Tensor prob_pre({b, cfg.prob_outputs});
  kernels::fc_forward(drop2.out.data(), b, cfg.fc_width, weights.at("prob.weight").data(),
                      weights.at("prob.bias").data(), cfg.prob_outputs, prob_pre.data());

  ForwardResult result;
  result.probabilities = Tensor({b, cfg.prob_outputs});
  kernels::sigmoid_forward(prob_pre.data(), prob_pre.size(), result.probabilities.data());

  // Regression head.
  if (cfg.regression_head == RegressionHead::ensemble_conv) {
    const int f = cfg.feature_spatial();
    const int c = cfg.feature_channels();
    const int ups = cfg.upsampled_spatial();
    Tensor ups_out({b, c, ups, ups});
    if (cfg.upsample_mode == UpsampleMode::nearest)
      kernels::upsample_nearest_forward(features.data(), b, c, f, f, cfg.upsample_factor,
                                        ups_out.data());
    else
      kernels::upsample_bilinear_forward(features.data(), b, c, f, f, cfg.upsample_factor,
                                         ups_out.data());
    Tensor ups_act({b, c, ups, ups});
    kernels::relu_forward(ups_out.data(), ups_out.size(), ups_act.data());

    Tensor reg({b, 1, kEnsembleSide, kEnsembleSide});
    kernels::conv2d_forward(ups_act.data(), b, c, ups, ups, weights.at("reg.weight").data(),
                            weights.at("reg.bias").data(), 1, cfg.reg_kernel, 0, reg.data());
    result.positions = Tensor({b, kEnsembleSide, kEnsembleSide});
    std::memcpy(result.positions.data(), reg.data(),
                sizeof(double) * static_cast<size_t>(reg.size()));
    if (trace != nullptr) {
      trace->ups_out = std::move(ups_out);
      trace->ups_act = std::move(ups_act);
    }
  } else {
    Tensor reg_pre({b, kEnsembleSide});
    kernels::fc_forward(flat.data(), b, flat_width, weights.at("reg_fc.weight").data(),
                        weights.at("reg_fc.bias").data(), kEnsembleSide, reg_pre.data());
    result.positions = Tensor({b, kEnsembleSide});
    kernels::sigmoid_forward(reg_pre.data(), reg_pre.size(), result.positions.data());
  }

  if (cfg.average_in_network && cfg.regression_head == RegressionHead::ensemble_conv) {
    // Parameter-free averaging layer: column-wise mean over ensemble rows.
    result.averaged = Tensor({b, kEnsembleSide});
    for (int bi = 0; bi < b; ++bi) {
      for (int col = 0; col < kEnsembleSide; ++col) {
        double acc = 0.0;
        for (int row = 0; row < kEnsembleSide; ++row)
          acc += result.positions[(static_cast<int64_t>(bi) * kEnsembleSide + row) *
                                      kEnsembleSide +
                                  col];
        result.averaged[static_cast<int64_t>(bi) * kEnsembleSide + col] =
            acc / kEnsembleSide;
      }
    }
  }

  if (trace != nullptr) {
    trace->flat = std::move(flat);
    trace->fc1_pre = std::move(fc1_pre);
    trace->fc1_act = std::move(fc1_act);
    trace->fc1_drop = std::move(drop1.out);
    trace->drop1_mask = std::move(drop1.mask);
    trace->fc2_pre = std::move(fc2_pre);
    trace->fc2_act = std::move(fc2_act);
    trace->fc2_drop = std::move(drop2.out);
    trace->drop2_mask = std::move(drop2.mask);
    trace->prob_pre = std::move(prob_pre);
    trace->result = result;
  }
  return result;
}

}  // namespace

ForwardResult forward(const NetworkWeights& weights, const Tensor& batch, bool train_mode,
                      Rng* dropout_rng) {
  return run_forward(weights, batch, train_mode, dropout_rng, nullptr);
}

ForwardResult forward_traced(const NetworkWeights& weights, const Tensor& batch, bool train_mode,
                             Rng* dropout_rng, ForwardTrace& trace) {
  return run_forward(weights, batch, train_mode, dropout_rng, &trace);
}

Gradients backward(const NetworkWeights& weights, const ForwardTrace& trace, const Tensor& dprob,
                   const Tensor& dpos) {
  const NetworkConfig& cfg = weights.config;
  const int b = trace.input.dim(0);
  if (!dprob.same_shape(trace.result.probabilities))
    throw InputError("dprob shape " + dprob.shape_string() + " does not match probabilities");
  if (!dpos.same_shape(trace.result.positions))
    throw InputError("dpos shape " + dpos.shape_string() + " does not match positions");

  Gradients grads;
  grads.arrays.reserve(weights.arrays.size());
  for (const auto& a : weights.arrays) grads.arrays.push_back({a.name, Tensor(a.tensor.shape())});

  const int flat_width = cfg.flatten_width();

  // Probability head, output to flat.
  Tensor dprob_pre({b, cfg.prob_outputs});
  kernels::sigmoid_backward(dprob.data(), trace.result.probabilities.data(), dprob.size(),
                            dprob_pre.data());
  kernels::fc_backward_params(dprob_pre.data(), trace.fc2_drop.data(), b, cfg.fc_width,
                              cfg.prob_outputs, grads.at("prob.weight").data(),
                              grads.at("prob.bias").data());
  Tensor dfc2_drop({b, cfg.fc_width});
  kernels::fc_backward_input(dprob_pre.data(), b, cfg.fc_width,
                             weights.at("prob.weight").data(), cfg.prob_outputs,
                             dfc2_drop.data());

  Tensor dfc2_act({b, cfg.fc_width});
  if (trace.train_mode && cfg.dropout_rate > 0.0) {
    for (int64_t i = 0; i < dfc2_act.size(); ++i)
      dfc2_act[i] = dfc2_drop[i] * trace.drop2_mask[i];
  } else {
    dfc2_act = dfc2_drop;
  }
  Tensor dfc2_pre({b, cfg.fc_width});
  kernels::relu_backward(dfc2_act.data(), trace.fc2_pre.data(), dfc2_act.size(), dfc2_pre.data());
  kernels::fc_backward_params(dfc2_pre.data(), trace.fc1_drop.data(), b, cfg.fc_width,
                              cfg.fc_width, grads.at("fc2.weight").data(),
                              grads.at("fc2.bias").data());
  Tensor dfc1_drop({b, cfg.fc_width});
  kernels::fc_backward_input(dfc2_pre.data(), b, cfg.fc_width, weights.at("fc2.weight").data(),
                             cfg.fc_width, dfc1_drop.data());

  Tensor dfc1_act({b, cfg.fc_width});
  if (trace.train_mode && cfg.dropout_rate > 0.0) {
    for (int64_t i = 0; i < dfc1_act.size(); ++i)
      dfc1_act[i] = dfc1_drop[i] * trace.drop1_mask[i];
  } else {
    dfc1_act = dfc1_drop;
  }
  Tensor dfc1_pre({b, cfg.fc_width});
  kernels::relu_backward(dfc1_act.data(), trace.fc1_pre.data(), dfc1_act.size(), dfc1_pre.data());
  kernels::fc_backward_params(dfc1_pre.data(), trace.flat.data(), b, flat_width, cfg.fc_width,
                              grads.at("fc1.weight").data(), grads.at("fc1.bias").data());
  Tensor dflat({b, flat_width});
  kernels::fc_backward_input(dfc1_pre.data(), b, flat_width, weights.at("fc1.weight").data(),
                             cfg.fc_width, dflat.data());

  // Regression head, output to feature maps (or flat for the FC head).
  const int f = cfg.feature_spatial();
  const int c = cfg.feature_channels();
  Tensor dfeatures({b, c, f, f});
  dfeatures.fill(0.0);

  if (cfg.regression_head == RegressionHead::ensemble_conv) {
    const int ups = cfg.upsampled_spatial();
    kernels::conv2d_backward_params(dpos.data(), trace.ups_act.data(), b, c, ups, ups, 1,
                                    cfg.reg_kernel, 0, grads.at("reg.weight").data(),
                                    grads.at("reg.bias").data());
    Tensor dups_act({b, c, ups, ups});
    kernels::conv2d_backward_input(dpos.data(), b, c, ups, ups, weights.at("reg.weight").data(),
                                   1, cfg.reg_kernel, 0, dups_act.data());
    Tensor dups_out({b, c, ups, ups});
    kernels::relu_backward(dups_act.data(), trace.ups_out.data(), dups_act.size(),
                           dups_out.data());
    if (cfg.upsample_mode == UpsampleMode::nearest)
      kernels::upsample_nearest_backward(dups_out.data(), b, c, f, f, cfg.upsample_factor,
                                         dfeatures.data());
    else
      kernels::upsample_bilinear_backward(dups_out.data(), b, c, f, f, cfg.upsample_factor,
                                          dfeatures.data());
  } else {
    Tensor dreg_pre({b, kEnsembleSide});
    kernels::sigmoid_backward(dpos.data(), trace.result.positions.data(), dpos.size(),
                              dreg_pre.data());
    kernels::fc_backward_params(dreg_pre.data(), trace.flat.data(), b, flat_width, kEnsembleSide,
                                grads.at("reg_fc.weight").data(),
                                grads.at("reg_fc.bias").data());
    Tensor dflat_reg({b, flat_width});
    kernels::fc_backward_input(dreg_pre.data(), b, flat_width,
                               weights.at("reg_fc.weight").data(), kEnsembleSide,
                               dflat_reg.data());
    for (int64_t i = 0; i < dflat.size(); ++i) dflat[i] += dflat_reg[i];
  }

  // Merge the flattened gradient into the feature-map gradient.
  for (int64_t i = 0; i < dflat.size(); ++i) dfeatures[i] += dflat[i];

  // Walk the feature stages backwards.
  Tensor dcur = std::move(dfeatures);
  int conv_idx = cfg.num_convs() - 1;
  int spatial = f;
  for (int s = static_cast<int>(cfg.stages.size()) - 1; s >= 0; --s) {
    const int ch = cfg.stages[s].channels;
    Tensor dpool_in({b, ch, spatial * 2, spatial * 2});
    kernels::maxpool2_backward(dcur.data(), trace.pool_argmax[static_cast<size_t>(s)].data(), b,
                               ch, spatial * 2, spatial * 2, dpool_in.data());
    dcur = std::move(dpool_in);
    spatial *= 2;
    for (int i = cfg.stages[static_cast<size_t>(s)].convs - 1; i >= 0; --i, --conv_idx) {
      const std::string name = conv_name(s, i);
      const Tensor& pre = trace.conv_preact[static_cast<size_t>(conv_idx)];
      const Tensor& conv_in = trace.conv_inputs[static_cast<size_t>(conv_idx)];
      const int ch_in = conv_in.dim(1);
      Tensor dpre(pre.shape());
      kernels::relu_backward(dcur.data(), pre.data(), dcur.size(), dpre.data());
      kernels::conv2d_backward_params(dpre.data(), conv_in.data(), b, ch_in, spatial, spatial,
                                      ch, 3, 1, grads.at(name + ".weight").data(),
                                      grads.at(name + ".bias").data());
      Tensor dconv_in(conv_in.shape());
      kernels::conv2d_backward_input(dpre.data(), b, ch_in, spatial, spatial,
                                     weights.at(name + ".weight").data(), ch, 3, 1,
                                     dconv_in.data());
      dcur = std::move(dconv_in);
    }
  }
  return grads;
}

uint64_t fnv1a64(const void* data, size_t size, uint64_t seed) {
  const uint8_t* bytes = static_cast<const uint8_t*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

json config_to_json(const NetworkConfig& c) {
  json j;
  j["input_size"] = c.input_size;
  json stages = json::array();
  for (const auto& s : c.stages) stages.push_back(json::array({s.convs, s.channels}));
  j["stages"] = stages;
  j["fc_width"] = c.fc_width;
  j["dropout_rate"] = c.dropout_rate;
  j["prob_outputs"] = c.prob_outputs;
  j["upsample_factor"] = c.upsample_factor;
  j["reg_kernel"] = c.reg_kernel;
  j["upsample_mode"] = c.upsample_mode == UpsampleMode::nearest ? "nearest" : "bilinear";
  j["regression_head"] =
      c.regression_head == RegressionHead::ensemble_conv ? "ensemble_conv" : "direct_fc";
  j["average_in_network"] = c.average_in_network;
  return j;
}

NetworkConfig config_from_json(const json& j) {
  NetworkConfig c;
  c.input_size = j.at("input_size").get<int>();
  c.stages.clear();
  for (const auto& s : j.at("stages")) c.stages.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
  c.fc_width = j.at("fc_width").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.prob_outputs = j.at("prob_outputs").get<int>();
  c.upsample_factor = j.at("upsample_factor").get<int>();
  c.reg_kernel = j.at("reg_kernel").get<int>();
  c.upsample_mode =
      j.at("upsample_mode").get<std::string>() == "bilinear" ? UpsampleMode::bilinear
                                                             : UpsampleMode::nearest;
  c.regression_head = j.at("regression_head").get<std::string>() == "direct_fc"
                          ? RegressionHead::direct_fc
                          : RegressionHead::ensemble_conv;
  c.average_in_network = j.at("average_in_network").get<bool>();
  return c;
}

constexpr char kCheckpointMagic[6] = {'U', 'G', 'W', 'B', '1', '\n'};

}  // namespace

void save_checkpoint(const NetworkWeights& weights, const std::filesystem::path& path) {
  uint64_t checksum = 0xcbf29ce484222325ULL;
  json arrays = json::array();
  for (const auto& a : weights.arrays) {
    json entry;
    entry["name"] = a.name;
    entry["shape"] = a.tensor.shape();
    arrays.push_back(entry);
    checksum = fnv1a64(a.tensor.data(), sizeof(double) * static_cast<size_t>(a.tensor.size()),
                       checksum);
  }
  json header;
  header["format"] = 1;
  header["config"] = config_to_json(weights.config);
  header["arrays"] = arrays;
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(checksum));
  header["checksum"] = std::string(hex);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::string header_str = header.dump();
  const uint64_t header_len = header_str.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& a : weights.arrays)
    out.write(reinterpret_cast<const char*>(a.tensor.data()),
              static_cast<std::streamsize>(sizeof(double) * a.tensor.size()));
  if (!out) throw DataError("short write: " + path.string());
}

NetworkWeights load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw DataError(path.string() + ": not a weights checkpoint");
  uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || header_len == 0 || header_len > (1ULL << 20))
    throw DataError(path.string() + ": corrupt checkpoint header");
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError(path.string() + ": truncated checkpoint header");
  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": bad checkpoint header: " + e.what());
  }

  NetworkWeights w;
  try {
    w.config = config_from_json(header.at("config"));
    for (const auto& entry : header.at("arrays")) {
      std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
      w.arrays.push_back({entry.at("name").get<std::string>(), Tensor(shape)});
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": bad checkpoint header: " + e.what());
  }

  uint64_t checksum = 0xcbf29ce484222325ULL;
  for (auto& a : w.arrays) {
    in.read(reinterpret_cast<char*>(a.tensor.data()),
            static_cast<std::streamsize>(sizeof(double) * a.tensor.size()));
    if (!in) throw DataError(path.string() + ": truncated checkpoint payload");
    checksum =
        fnv1a64(a.tensor.data(), sizeof(double) * static_cast<size_t>(a.tensor.size()), checksum);
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(checksum));
  if (header.at("checksum").get<std::string>() != hex)
    throw DataError(path.string() + ": checkpoint checksum mismatch");
  w.config.validate();
  return w;
}

}  // namespace unigest

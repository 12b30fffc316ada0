#include "unigest/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "unigest/errors.hpp"
#include "unigest/pipeline.hpp"

namespace unigest {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_same_shape(const Tensor& truth, const Tensor& pred, const char* what) {
  if (!truth.same_shape(pred))
    throw InputError(std::string(what) + ": shape mismatch " + truth.shape_string() + " vs " +
                     pred.shape_string());
}

// Rows per sample (R) and samples (M) for an M x R x 2N or M x 2N tensor.
void positional_dims(const Tensor& t, int* m, int* r) {
  if (t.rank() == 3 && t.dim(2) == kEnsembleSide) {
    *m = t.dim(0);
    *r = t.dim(1);
  } else if (t.rank() == 2 && t.dim(1) == kEnsembleSide) {
    *m = t.dim(0);
    *r = 1;
  } else {
    throw InputError("positional tensors must be Mx" + std::to_string(kEnsembleSide) + " or MxRx" +
                     std::to_string(kEnsembleSide) + ", got " + t.shape_string());
  }
}

}  // namespace

double probabilistic_loss(const Tensor& truth, const Tensor& pred) {
  check_same_shape(truth, pred, "probabilistic_loss");
  if (truth.rank() != 2) throw InputError("probabilistic_loss expects M x N tensors");
  double sum = 0.0;
  for (int64_t i = 0; i < truth.size(); ++i) {
    const double t = truth[i];
    const double p = std::clamp(pred[i], kBceClamp, 1.0 - kBceClamp);
    sum += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
  }
  return sum / static_cast<double>(truth.size());
}

Tensor probabilistic_loss_grad(const Tensor& truth, const Tensor& pred) {
  check_same_shape(truth, pred, "probabilistic_loss");
  Tensor grad(pred.shape());
  const double scale = 1.0 / static_cast<double>(truth.size());
  for (int64_t i = 0; i < truth.size(); ++i) {
    if (pred[i] < kBceClamp || pred[i] > 1.0 - kBceClamp) {
      grad[i] = 0.0;  // clamped region is locally constant
      continue;
    }
    const double t = truth[i];
    const double p = pred[i];
    grad[i] = scale * (-t / p + (1.0 - t) / (1.0 - p));
  }
  return grad;
}

double positional_loss(const Tensor& truth, const Tensor& pred,
                       const std::vector<VisibilityMask>& masks, bool renormalize_by_visible) {
  check_same_shape(truth, pred, "positional_loss");
  int m = 0;
  int r = 0;
  positional_dims(truth, &m, &r);
  if (static_cast<int>(masks.size()) != m)
    throw InputError("positional_loss: need one mask per sample");
  double sum = 0.0;
  int64_t visible_terms = 0;
  for (int j = 0; j < m; ++j) {
    for (int row = 0; row < r; ++row) {
      const int64_t base = (static_cast<int64_t>(j) * r + row) * kEnsembleSide;
      for (int col = 0; col < kEnsembleSide; ++col) {
        if (!masks[static_cast<size_t>(j)].column_visible(col)) continue;
        const double d = truth[base + col] - pred[base + col];
        sum += d * d;
        ++visible_terms;
      }
    }
  }
  const double denom = renormalize_by_visible
                           ? static_cast<double>(std::max<int64_t>(visible_terms, 1))
                           : static_cast<double>(m) * r * kEnsembleSide;
  return sum / denom;
}

Tensor positional_loss_grad(const Tensor& truth, const Tensor& pred,
                            const std::vector<VisibilityMask>& masks,
                            bool renormalize_by_visible) {
  check_same_shape(truth, pred, "positional_loss");
  int m = 0;
  int r = 0;
  positional_dims(truth, &m, &r);
  if (static_cast<int>(masks.size()) != m)
    throw InputError("positional_loss: need one mask per sample");
  double denom = static_cast<double>(m) * r * kEnsembleSide;
  if (renormalize_by_visible) {
    int64_t visible_terms = 0;
    for (int j = 0; j < m; ++j)
      for (int col = 0; col < kEnsembleSide; ++col)
        if (masks[static_cast<size_t>(j)].column_visible(col)) visible_terms += r;
    denom = static_cast<double>(std::max<int64_t>(visible_terms, 1));
  }
  Tensor grad(pred.shape());
  for (int j = 0; j < m; ++j) {
    for (int row = 0; row < r; ++row) {
      const int64_t base = (static_cast<int64_t>(j) * r + row) * kEnsembleSide;
      for (int col = 0; col < kEnsembleSide; ++col) {
        if (!masks[static_cast<size_t>(j)].column_visible(col)) continue;
        grad[base + col] = 2.0 * (pred[base + col] - truth[base + col]) / denom;
      }
    }
  }
  return grad;
}

double total_loss(double probabilistic, double positional) { return probabilistic + positional; }

OptimizerState OptimizerState::init(const NetworkWeights& weights, const AdamConfig& config) {
  if (config.lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (config.epsilon <= 0.0) throw ConfigError("epsilon must be positive");
  if (config.beta1 <= 0.0 || config.beta1 >= 1.0 || config.beta2 <= 0.0 || config.beta2 >= 1.0)
    throw ConfigError("beta1 and beta2 must lie in (0, 1)");
  OptimizerState state;
  state.config = config;
  for (const auto& a : weights.arrays) {
    state.m.push_back({a.name, Tensor(a.tensor.shape())});
    state.v.push_back({a.name, Tensor(a.tensor.shape())});
  }
  return state;
}

void adam_step(NetworkWeights& weights, const Gradients& grads, OptimizerState& state) {
  if (weights.arrays.size() != grads.arrays.size() ||
      weights.arrays.size() != state.m.size())
    throw InputError("adam_step: weights, gradients and state disagree");
  for (size_t a = 0; a < grads.arrays.size(); ++a)
    if (!grads.arrays[a].tensor.all_finite())
      throw TrainError("non-finite gradient in " + grads.arrays[a].name + " at step " +
                       std::to_string(state.step + 1));

  const AdamConfig& c = state.config;
  state.step += 1;
  const double bc1 = c.bias_correction ? 1.0 - std::pow(c.beta1, static_cast<double>(state.step))
                                       : 1.0;
  const double bc2 = c.bias_correction ? 1.0 - std::pow(c.beta2, static_cast<double>(state.step))
                                       : 1.0;
  for (size_t a = 0; a < weights.arrays.size(); ++a) {
    Tensor& w = weights.arrays[a].tensor;
    const Tensor& g = grads.arrays[a].tensor;
    Tensor& m = state.m[a].tensor;
    Tensor& v = state.v[a].tensor;
    const int64_t n = w.size();
    double* wd = w.data();
    const double* gd = g.data();
    double* md = m.data();
    double* vd = v.data();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
      md[i] = c.beta1 * md[i] + (1.0 - c.beta1) * gd[i];
      vd[i] = c.beta2 * vd[i] + (1.0 - c.beta2) * gd[i] * gd[i];
      const double mhat = md[i] / bc1;
      const double vhat = vd[i] / bc2;
      wd[i] -= c.lr * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

AffineTransform AffineTransform::about_center(const std::array<double, 2>& center,
                                              double rotation_deg, double shear_deg, double scale,
                                              const std::array<double, 2>& translation) {
  const double theta = rotation_deg * kPi / 180.0;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double shear = std::tan(shear_deg * kPi / 180.0);
  // M = R * ShearX * S
  const double m00 = (cos_t * 1.0 + (-sin_t) * 0.0) * scale;
  const double m01 = (cos_t * shear + (-sin_t) * 1.0) * scale;
  const double m10 = (sin_t * 1.0 + cos_t * 0.0) * scale;
  const double m11 = (sin_t * shear + cos_t * 1.0) * scale;
  AffineTransform t;
  t.m = {m00, m01, m10, m11};
  // p' = M (p - c) + c + translation
  t.t = {center[0] - m00 * center[0] - m01 * center[1] + translation[0],
         center[1] - m10 * center[0] - m11 * center[1] + translation[1]};
  return t;
}

AffineTransform AffineTransform::inverse() const {
  const double det = m[0] * m[3] - m[1] * m[2];
  if (std::abs(det) < 1e-12) throw InputError("affine transform is singular");
  AffineTransform inv;
  inv.m = {m[3] / det, -m[1] / det, -m[2] / det, m[0] / det};
  inv.t = {-(inv.m[0] * t[0] + inv.m[1] * t[1]), -(inv.m[2] * t[0] + inv.m[3] * t[1])};
  return inv;
}

AnnotatedSample apply_geometric(const AnnotatedSample& sample, const AffineTransform& transform) {
  AnnotatedSample out = sample;

  const AffineTransform inv = transform.inverse();
  Image moved(sample.image.width, sample.image.height);
  for (int y = 0; y < moved.height; ++y) {
    for (int x = 0; x < moved.width; ++x) {
      const std::array<double, 2> src = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      uint8_t* px = moved.px(x, y);
      for (int ch = 0; ch < 3; ++ch) {
        const double v = sample_bilinear(sample.image, src[0], src[1], ch);
        px[ch] = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  out.image = std::move(moved);

  // Axis-aligned envelope of the mapped box corners. Points inside the
  // original box stay inside the envelope.
  const std::array<std::array<double, 2>, 4> corners = {{
      {static_cast<double>(sample.bbox.x_tl), static_cast<double>(sample.bbox.y_tl)},
      {static_cast<double>(sample.bbox.x_br), static_cast<double>(sample.bbox.y_tl)},
      {static_cast<double>(sample.bbox.x_tl), static_cast<double>(sample.bbox.y_br)},
      {static_cast<double>(sample.bbox.x_br), static_cast<double>(sample.bbox.y_br)},
  }};
  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  for (const auto& corner : corners) {
    const auto p = transform.apply(corner);
    min_x = std::min(min_x, p[0]);
    max_x = std::max(max_x, p[0]);
    min_y = std::min(min_y, p[1]);
    max_y = std::max(max_y, p[1]);
  }
  BoundingBox box{static_cast<int>(std::floor(min_x)), static_cast<int>(std::floor(min_y)),
                  static_cast<int>(std::ceil(max_x)), static_cast<int>(std::ceil(max_y))};
  out.bbox = box.clipped(sample.image.width, sample.image.height);

  for (int f = 0; f < kNumFingers; ++f) {
    if (!sample.fingertips.coords[f].has_value()) continue;
    out.fingertips.coords[f] = transform.apply(*sample.fingertips.coords[f]);
  }
  return out;
}

AnnotatedSample augment(const AnnotatedSample& sample, const AugmentationConfig& config,
                        Rng& rng) {
  if (!config.enabled) return sample;

  AnnotatedSample out = sample;
  if (config.geometric) {
    const std::array<double, 2> center = {
        (sample.bbox.x_tl + sample.bbox.x_br - 1) / 2.0,
        (sample.bbox.y_tl + sample.bbox.y_br - 1) / 2.0};
    bool accepted = false;
    for (int attempt = 0; attempt < config.max_attempts && !accepted; ++attempt) {
      const double rot = rng.uniform(-config.max_rotation_deg, config.max_rotation_deg);
      const double tx =
          rng.uniform(-config.max_translation_frac, config.max_translation_frac) *
          sample.bbox.width();
      const double ty =
          rng.uniform(-config.max_translation_frac, config.max_translation_frac) *
          sample.bbox.height();
      const double shear = rng.uniform(-config.max_shear_deg, config.max_shear_deg);
      const double scale = rng.uniform(config.min_scale, config.max_scale);
      const AffineTransform t =
          AffineTransform::about_center(center, rot, shear, scale, {tx, ty});

      // Cheap pre-check on the coordinates before resampling the image.
      bool ok = true;
      BoundingBox moved_box;
      {
        AnnotatedSample probe;
        probe.image.width = sample.image.width;
        probe.image.height = sample.image.height;
        probe.bbox = sample.bbox;
        const std::array<std::array<double, 2>, 4> corners = {{
            {static_cast<double>(sample.bbox.x_tl), static_cast<double>(sample.bbox.y_tl)},
            {static_cast<double>(sample.bbox.x_br), static_cast<double>(sample.bbox.y_tl)},
            {static_cast<double>(sample.bbox.x_tl), static_cast<double>(sample.bbox.y_br)},
            {static_cast<double>(sample.bbox.x_br), static_cast<double>(sample.bbox.y_br)},
        }};
        double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
        for (const auto& corner : corners) {
          const auto p = t.apply(corner);
          min_x = std::min(min_x, p[0]);
          max_x = std::max(max_x, p[0]);
          min_y = std::min(min_y, p[1]);
          max_y = std::max(max_y, p[1]);
        }
        moved_box = BoundingBox{static_cast<int>(std::floor(min_x)),
                                static_cast<int>(std::floor(min_y)),
                                static_cast<int>(std::ceil(max_x)),
                                static_cast<int>(std::ceil(max_y))}
                        .clipped(sample.image.width, sample.image.height);
        if (moved_box.width() <= 0 || moved_box.height() <= 0) ok = false;
        for (int f = 0; ok && f < kNumFingers; ++f) {
          if (!sample.fingertips.coords[f].has_value()) continue;
          const auto p = t.apply(*sample.fingertips.coords[f]);
          if (!moved_box.contains(p[0], p[1])) ok = false;
        }
      }
      if (!ok) continue;
      out = apply_geometric(sample, t);
      accepted = true;
    }
    // All attempts rejected: keep identity geometry.
  }

  if (config.illumination) {
    const double factor =
        rng.uniform(1.0 - config.max_brightness_delta, 1.0 + config.max_brightness_delta);
    for (uint8_t& v : out.image.pixels)
      v = static_cast<uint8_t>(std::lround(std::clamp(v * factor, 0.0, 255.0)));
  }
  if (config.gaussian_noise && config.gaussian_sigma > 0.0) {
    const double sigma = config.gaussian_sigma * 255.0;
    for (uint8_t& v : out.image.pixels)
      v = static_cast<uint8_t>(std::lround(std::clamp(v + rng.gaussian() * sigma, 0.0, 255.0)));
  }
  if (config.salt_noise && config.salt_fraction > 0.0) {
    const int64_t n_pixels = static_cast<int64_t>(out.image.width) * out.image.height;
    const int64_t n_salt = static_cast<int64_t>(config.salt_fraction * n_pixels * rng.uniform());
    for (int64_t i = 0; i < n_salt; ++i) {
      const int x = rng.uniform_int(out.image.width);
      const int y = rng.uniform_int(out.image.height);
      out.image.set(x, y, 255, 255, 255);
    }
  }
  return out;
}

double lr_for_epoch(const TrainConfig& config, int epoch) {
  if (config.lr_schedule.empty()) return config.adam.lr;
  for (const LrStep& step : config.lr_schedule)
    if (epoch <= step.until_epoch) return step.lr;
  return config.lr_schedule.back().lr;
}

void write_history_csv(const History& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write history: " + path.string());
  out << "epoch,train_L1,train_L2,train_L,val_L1,val_L2,val_L\n";
  out.precision(12);
  for (const HistoryRow& row : history) {
    out << row.epoch << "," << row.train.probabilistic << "," << row.train.positional << ","
        << row.train.total << "," << row.val.probabilistic << "," << row.val.positional << ","
        << row.val.total << "\n";
  }
}

History read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open history: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty history file");
  History history;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    HistoryRow row;
    char comma;
    ss >> row.epoch >> comma >> row.train.probabilistic >> comma >> row.train.positional >>
        comma >> row.train.total >> comma >> row.val.probabilistic >> comma >>
        row.val.positional >> comma >> row.val.total;
    if (ss.fail())
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad history row");
    history.push_back(row);
  }
  return history;
}

TrainData TrainData::from_samples(const std::vector<AnnotatedSample>& samples) {
  TrainData data;
  data.count = samples.size();
  data.get = [&samples](size_t i) { return samples[i]; };
  return data;
}

PreparedSample prepare_sample(const AnnotatedSample& sample, int input_size) {
  PreparedSample prep;
  const Crop crop = crop_and_resize(sample.image, sample.bbox, input_size);
  prep.input = to_input_tensor(crop.image);  // 1 x 3 x S x S
  for (int f = 0; f < kNumFingers; ++f) {
    prep.prob_target[f] = sample.code.bits[f] != 0 ? 1.0 : 0.0;
    if (sample.fingertips.coords[f].has_value()) {
      const auto norm = to_normalized(*sample.fingertips.coords[f], crop.box);
      prep.coord_row[2 * f] = norm[0];
      prep.coord_row[2 * f + 1] = norm[1];
    }
  }
  prep.mask = VisibilityMask::from_code(sample.code);
  return prep;
}

namespace {

struct Batch {
  Tensor input;                      // M x 3 x S x S
  Tensor prob_target;                // M x 5
  Tensor coord_target;               // M x 10 x 10, M x 10 for direct/averaged heads
  std::vector<VisibilityMask> masks;
};

Batch assemble_batch(const std::vector<PreparedSample>& prepared, const NetworkConfig& nc) {
  const int m = static_cast<int>(prepared.size());
  const int s = nc.input_size;
  Batch batch;
  batch.input = Tensor({m, 3, s, s});
  batch.prob_target = Tensor({m, kNumFingers});
  const bool row_target =
      nc.regression_head == RegressionHead::direct_fc || nc.average_in_network;
  batch.coord_target = row_target ? Tensor({m, kEnsembleSide})
                                  : Tensor({m, kEnsembleSide, kEnsembleSide});
  batch.masks.reserve(prepared.size());
  for (int j = 0; j < m; ++j) {
    const PreparedSample& p = prepared[static_cast<size_t>(j)];
    std::copy(p.input.data(), p.input.data() + p.input.size(),
              batch.input.data() + static_cast<int64_t>(j) * 3 * s * s);
    for (int f = 0; f < kNumFingers; ++f)
      batch.prob_target[static_cast<int64_t>(j) * kNumFingers + f] = p.prob_target[f];
    if (row_target) {
      for (int col = 0; col < kEnsembleSide; ++col)
        batch.coord_target[static_cast<int64_t>(j) * kEnsembleSide + col] = p.coord_row[col];
    } else {
      // Ground-truth ensemble: the coordinate row stacked 2N times.
      for (int row = 0; row < kEnsembleSide; ++row)
        for (int col = 0; col < kEnsembleSide; ++col)
          batch.coord_target[(static_cast<int64_t>(j) * kEnsembleSide + row) * kEnsembleSide +
                             col] = p.coord_row[col];
    }
    batch.masks.push_back(p.mask);
  }
  return batch;
}

struct BatchLosses {
  double probabilistic = 0.0;
  double positional = 0.0;
};

// Eval-mode losses over a data slice, dropout disabled.
BatchLosses evaluate_losses(const NetworkWeights& weights, const TrainData& data,
                            const TrainConfig& tc, const NetworkConfig& nc) {
  BatchLosses total;
  if (data.count == 0) return total;
  size_t done = 0;
  while (done < data.count) {
    const size_t m = std::min<size_t>(static_cast<size_t>(tc.batch_size), data.count - done);
    std::vector<PreparedSample> prepared(m);
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(m); ++i)
      prepared[static_cast<size_t>(i)] =
          prepare_sample(data.get(done + static_cast<size_t>(i)), nc.input_size);
    Batch batch = assemble_batch(prepared, nc);
    ForwardResult out = forward(weights, batch.input, /*train_mode=*/false);
    const Tensor& coords = nc.average_in_network ? out.averaged : out.positions;
    const double l1 = probabilistic_loss(batch.prob_target, out.probabilities);
    const double l2 = positional_loss(batch.coord_target, coords, batch.masks,
                                      tc.renormalize_positional_by_visible);
    total.probabilistic += l1 * static_cast<double>(m);
    total.positional += l2 * static_cast<double>(m);
    done += m;
  }
  total.probabilistic /= static_cast<double>(data.count);
  total.positional /= static_cast<double>(data.count);
  return total;
}

}  // namespace

TrainResult train(const TrainData& train_set, const TrainData& val_set, const TrainConfig& config,
                  const NetworkConfig& network_config) {
  network_config.validate();
  if (train_set.count == 0) throw InputError("training set is empty");
  if (config.batch_size < 1) throw ConfigError("batch_size must be at least 1");

  TrainResult result;
  result.weights = build(network_config, config.seed);
  if (config.epochs == 0) return result;

  AdamConfig adam = config.adam;
  adam.lr = lr_for_epoch(config, 1);
  OptimizerState opt = OptimizerState::init(result.weights, adam);

  NetworkWeights last_good = result.weights;
  int64_t step = 0;
  bool stop = false;

  std::vector<size_t> order(train_set.count);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    opt.config.lr = lr_for_epoch(config, epoch);

    Rng shuffle_rng({config.seed, 0x73687566ULL, static_cast<uint64_t>(epoch)});
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<size_t>(shuffle_rng.uniform_int(
                                  static_cast<int>(i)))]);

    double epoch_l1 = 0.0;
    double epoch_l2 = 0.0;
    size_t seen = 0;

    for (size_t start = 0; start < order.size() && !stop; start += config.batch_size) {
      const size_t m =
          std::min<size_t>(static_cast<size_t>(config.batch_size), order.size() - start);
      std::vector<PreparedSample> prepared(m);
      // Each sample draws from its own (seed, epoch, index) stream, so
      // results do not depend on the worker count.
#pragma omp parallel for schedule(dynamic)
      for (int64_t i = 0; i < static_cast<int64_t>(m); ++i) {
        const size_t sample_index = order[start + static_cast<size_t>(i)];
        AnnotatedSample sample = train_set.get(sample_index);
        if (config.augmentation.enabled) {
          Rng aug_rng({config.seed, 0x617567ULL, static_cast<uint64_t>(epoch),
                       static_cast<uint64_t>(sample_index)});
          sample = augment(sample, config.augmentation, aug_rng);
        }
        prepared[static_cast<size_t>(i)] = prepare_sample(sample, network_config.input_size);
      }

      Batch batch = assemble_batch(prepared, network_config);
      Rng dropout_rng({config.seed, 0x64726f70ULL, static_cast<uint64_t>(epoch),
                       static_cast<uint64_t>(start)});
      ForwardTrace trace;
      ForwardResult out = forward_traced(result.weights, batch.input, /*train_mode=*/true,
                                         &dropout_rng, trace);

      const bool averaged_head = network_config.average_in_network;
      const Tensor& coords = averaged_head ? out.averaged : out.positions;
      const double l1 = probabilistic_loss(batch.prob_target, out.probabilities);
      const double l2 = positional_loss(batch.coord_target, coords, batch.masks,
                                        config.renormalize_positional_by_visible);
      const double l = total_loss(l1, l2);
      if (!std::isfinite(l)) {
        result.weights = last_good;
        result.diverged_at_step = step;
        return result;
      }
      epoch_l1 += l1 * static_cast<double>(m);
      epoch_l2 += l2 * static_cast<double>(m);
      seen += m;

      Tensor dprob = probabilistic_loss_grad(batch.prob_target, out.probabilities);
      Tensor dcoords = positional_loss_grad(batch.coord_target, coords, batch.masks,
                                            config.renormalize_positional_by_visible);
      Tensor dpos = std::move(dcoords);
      if (averaged_head) {
        // Distribute the averaged gradient uniformly over the ensemble rows.
        Tensor densemble(out.positions.shape());
        const int b = densemble.dim(0);
        for (int bi = 0; bi < b; ++bi)
          for (int row = 0; row < kEnsembleSide; ++row)
            for (int col = 0; col < kEnsembleSide; ++col)
              densemble[(static_cast<int64_t>(bi) * kEnsembleSide + row) * kEnsembleSide + col] =
                  dpos[static_cast<int64_t>(bi) * kEnsembleSide + col] / kEnsembleSide;
        dpos = std::move(densemble);
      }

      Gradients grads = backward(result.weights, trace, dprob, dpos);
      try {
        adam_step(result.weights, grads, opt);
      } catch (const TrainError&) {
        result.weights = last_good;
        result.diverged_at_step = step;
        return result;
      }
      ++step;
      if (config.max_steps > 0 && step >= config.max_steps) stop = true;
    }

    HistoryRow row;
    row.epoch = epoch;
    row.train.probabilistic = epoch_l1 / static_cast<double>(seen);
    row.train.positional = epoch_l2 / static_cast<double>(seen);
    row.train.total = row.train.probabilistic + row.train.positional;
    const BatchLosses val = evaluate_losses(result.weights, val_set, config, network_config);
    row.val.probabilistic = val.probabilistic;
    row.val.positional = val.positional;
    row.val.total = val.probabilistic + val.positional;
    result.history.push_back(row);

    if (config.verbose) {
      std::fprintf(stderr, "epoch %d  lr %.2e  train L %.6f  val L %.6f\n", epoch, opt.config.lr,
                   row.train.total, row.val.total);
    }

    if (config.checkpoint_interval > 0 && !config.checkpoint_dir.empty() &&
        epoch % config.checkpoint_interval == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04d.ckpt", epoch);
      save_checkpoint(result.weights, config.checkpoint_dir / name);
    }
    last_good = result.weights;
  }
  return result;
}

}  // namespace unigest

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "unigest/dataio.hpp"
#include "unigest/errors.hpp"
#include "unigest/training.hpp"

using namespace unigest;

namespace {

// Element-by-element cross entropy, written independently of the library
// implementation and kept deliberately naive.
double bce_oracle(const Tensor& truth, const Tensor& pred) {
  double sum = 0.0;
  for (int64_t i = 0; i < truth.size(); ++i) {
    double p = pred[i];
    if (p < 1e-7) p = 1e-7;
    if (p > 1.0 - 1e-7) p = 1.0 - 1e-7;
    sum -= truth[i] * std::log(p) + (1.0 - truth[i]) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(truth.size());
}

// Triple loop over (sample, row, column) with explicit masking.
double mse_oracle(const Tensor& truth, const Tensor& pred,
                  const std::vector<VisibilityMask>& masks) {
  const int m = truth.dim(0);
  const int r = truth.dim(1);
  const int n2 = truth.dim(2);
  double sum = 0.0;
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < r; ++k)
      for (int l = 0; l < n2; ++l) {
        const double indicator = masks[static_cast<size_t>(j)].finger_visible[l / 2] ? 1.0 : 0.0;
        const double d = truth[(j * r + k) * n2 + l] - pred[(j * r + k) * n2 + l];
        sum += indicator * d * d;
      }
  return sum / (4.0 * 5.0 * 5.0 * m);
}

VisibilityMask mask_of(std::array<uint8_t, 5> bits) {
  GestureCode code;
  code.bits = bits;
  return VisibilityMask::from_code(code);
}

}  // namespace

TEST_CASE("cross entropy of a single term at pred 0.5 is ln 2") {
  Tensor truth({1, 1}), pred({1, 1});
  truth[0] = 1.0;
  pred[0] = 0.5;
  CHECK(probabilistic_loss(truth, pred) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy of a perfect clamped prediction is at the clamp floor") {
  Tensor truth({2, 5}), pred({2, 5});
  Rng rng(1);
  for (int64_t i = 0; i < truth.size(); ++i) {
    truth[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    pred[i] = truth[i];
  }
  const double loss = probabilistic_loss(truth, pred);
  CHECK(loss >= 0.0);
  CHECK(loss <= -std::log(1.0 - 1e-7) + 1e-12);  // clamp-induced floor
}

TEST_CASE("cross entropy matches the element-wise oracle on random batches") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 1 + rng.uniform_int(8);
    Tensor truth({m, 5}), pred({m, 5});
    for (int64_t i = 0; i < truth.size(); ++i) {
      truth[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
      pred[i] = rng.uniform();
    }
    const double expected = bce_oracle(truth, pred);
    CHECK(probabilistic_loss(truth, pred) ==
          doctest::Approx(expected).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("cross entropy gradient matches finite differences") {
  Rng rng(3);
  Tensor truth({2, 5}), pred({2, 5});
  for (int64_t i = 0; i < truth.size(); ++i) {
    truth[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    pred[i] = rng.uniform(0.05, 0.95);
  }
  const Tensor grad = probabilistic_loss_grad(truth, pred);
  const double eps = 1e-7;
  for (int64_t i = 0; i < pred.size(); ++i) {
    Tensor up = pred, down = pred;
    up[i] += eps;
    down[i] -= eps;
    const double fd = (probabilistic_loss(truth, up) - probabilistic_loss(truth, down)) / (2 * eps);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("positional loss is zero for identical tensors and for all-hidden masks") {
  Rng rng(4);
  Tensor truth({2, 10, 10}), pred({2, 10, 10});
  for (int64_t i = 0; i < truth.size(); ++i) {
    truth[i] = rng.uniform();
    pred[i] = rng.uniform();
  }
  const std::vector<VisibilityMask> all_visible(2, mask_of({1, 1, 1, 1, 1}));
  CHECK(positional_loss(truth, truth, all_visible) == 0.0);
  const std::vector<VisibilityMask> all_hidden(2, mask_of({0, 0, 0, 0, 0}));
  CHECK(positional_loss(truth, pred, all_hidden) == 0.0);
}

TEST_CASE("positional loss with one visible finger and constant error 0.1 is 0.002") {
  Tensor truth({1, 10, 10}), pred({1, 10, 10});
  const std::vector<VisibilityMask> masks = {mask_of({0, 1, 0, 0, 0})};
  // finger 1 owns columns 2 and 3
  for (int row = 0; row < 10; ++row) {
    pred[row * 10 + 2] = truth[row * 10 + 2] + 0.1;
    pred[row * 10 + 3] = truth[row * 10 + 3] + 0.1;
  }
  CHECK(positional_loss(truth, pred, masks) == doctest::Approx(0.002).epsilon(1e-12));
  // renormalizing by the 20 visible terms gives 0.01 instead
  CHECK(positional_loss(truth, pred, masks, true) == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("positional loss matches the triple-loop oracle on random inputs") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor truth({2, 10, 10}), pred({2, 10, 10});
    for (int64_t i = 0; i < truth.size(); ++i) {
      truth[i] = rng.uniform();
      pred[i] = rng.uniform();
    }
    std::vector<VisibilityMask> masks;
    for (int j = 0; j < 2; ++j) {
      std::array<uint8_t, 5> bits{};
      for (auto& b : bits) b = rng.uniform() < 0.5 ? 1 : 0;
      masks.push_back(mask_of(bits));
    }
    const double expected = mse_oracle(truth, pred, masks);
    CHECK(positional_loss(truth, pred, masks) ==
          doctest::Approx(expected).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("perturbing hidden-finger columns leaves the loss exactly unchanged") {
  Rng rng(6);
  Tensor truth({2, 10, 10}), pred({2, 10, 10});
  for (int64_t i = 0; i < truth.size(); ++i) {
    truth[i] = rng.uniform();
    pred[i] = rng.uniform();
  }
  const std::vector<VisibilityMask> masks = {mask_of({1, 0, 1, 0, 1}), mask_of({0, 1, 0, 1, 0})};
  const double base = positional_loss(truth, pred, masks);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor perturbed = pred;
    for (int j = 0; j < 2; ++j)
      for (int row = 0; row < 10; ++row)
        for (int col = 0; col < 10; ++col)
          if (!masks[static_cast<size_t>(j)].column_visible(col))
            perturbed[(j * 10 + row) * 10 + col] += rng.uniform(-100.0, 100.0);
    CHECK(positional_loss(truth, perturbed, masks) == base);
  }
}

TEST_CASE("positional gradient matches finite differences and masks hidden columns") {
  Rng rng(7);
  Tensor truth({1, 10, 10}), pred({1, 10, 10});
  for (int64_t i = 0; i < truth.size(); ++i) {
    truth[i] = rng.uniform();
    pred[i] = rng.uniform();
  }
  const std::vector<VisibilityMask> masks = {mask_of({1, 1, 0, 0, 1})};
  const Tensor grad = positional_loss_grad(truth, pred, masks);
  const double eps = 1e-6;
  for (int64_t i = 0; i < pred.size(); ++i) {
    if (!masks[0].column_visible(static_cast<int>(i % 10))) {
      CHECK(grad[i] == 0.0);
      continue;
    }
    Tensor up = pred, down = pred;
    up[i] += eps;
    down[i] -= eps;
    const double fd =
        (positional_loss(truth, up, masks) - positional_loss(truth, down, masks)) / (2 * eps);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("total loss is the plain sum") {
  CHECK(total_loss(0.0, 0.0) == 0.0);
  CHECK(total_loss(0.693, 0.002) == doctest::Approx(0.695));
}

TEST_CASE("positional loss is zero only when visible entries agree") {
  Rng rng(19);
  Tensor truth({1, 10, 10}), pred({1, 10, 10});
  for (int64_t i = 0; i < truth.size(); ++i) truth[i] = pred[i] = rng.uniform();
  const std::vector<VisibilityMask> masks = {mask_of({1, 0, 1, 0, 1})};
  CHECK(positional_loss(truth, pred, masks) == 0.0);
  pred[4] += 1e-3;  // column 4 belongs to the visible middle finger
  CHECK(positional_loss(truth, pred, masks) > 0.0);
}

TEST_CASE("regression-head gradients come from the positional loss alone") {
  NetworkConfig cfg;
  cfg.input_size = 8;
  cfg.stages = {{1, 4}};
  cfg.fc_width = 8;
  cfg.dropout_rate = 0.0;
  cfg.upsample_factor = 3;
  const NetworkWeights w = build(cfg, 33);

  Rng rng(33);
  Tensor batch({2, 3, 8, 8});
  for (int64_t i = 0; i < batch.size(); ++i) batch[i] = rng.uniform();
  Tensor pt({2, 5}), xt({2, 10, 10});
  for (int64_t i = 0; i < pt.size(); ++i) pt[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  for (int64_t i = 0; i < xt.size(); ++i) xt[i] = rng.uniform();
  const std::vector<VisibilityMask> masks(2, mask_of({1, 1, 1, 1, 1}));

  ForwardTrace trace;
  const ForwardResult out = forward_traced(w, batch, false, nullptr, trace);
  const Tensor dprob = probabilistic_loss_grad(pt, out.probabilities);
  const Tensor dpos = positional_loss_grad(xt, out.positions, masks);

  const Gradients joint = backward(w, trace, dprob, dpos);
  Tensor zero_prob({2, 5});
  const Gradients positional_only = backward(w, trace, zero_prob, dpos);
  const Tensor& a = joint.at("reg.weight");
  const Tensor& b = positional_only.at("reg.weight");
  for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  CHECK(joint.at("reg.bias")[0] == positional_only.at("reg.bias")[0]);
}

namespace {

NetworkWeights scalar_weights() {
  NetworkConfig cfg;
  cfg.input_size = 8;
  cfg.stages = {{1, 2}};
  cfg.fc_width = 8;
  cfg.dropout_rate = 0.0;
  cfg.upsample_factor = 3;
  NetworkWeights w;
  w.config = cfg;
  w.arrays.push_back({"w", Tensor({1})});
  return w;
}

}  // namespace

TEST_CASE("adam with zero gradients leaves weights unchanged") {
  NetworkWeights w = scalar_weights();
  w.arrays[0].tensor[0] = 0.37;
  AdamConfig cfg;
  cfg.lr = 0.01;
  OptimizerState state = OptimizerState::init(w, cfg);
  Gradients g;
  g.arrays.push_back({"w", Tensor({1})});
  adam_step(w, g, state);
  CHECK(w.arrays[0].tensor[0] == 0.37);
}

TEST_CASE("one scalar adam step reproduces the hand-computed update") {
  NetworkWeights w = scalar_weights();
  w.arrays[0].tensor[0] = 1.0;
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.epsilon = 1e-10;
  OptimizerState state = OptimizerState::init(w, cfg);
  Gradients g;
  g.arrays.push_back({"w", Tensor({1})});
  g.arrays[0].tensor[0] = 1.0;
  adam_step(w, g, state);
  // m = 0.1, v = 0.001, step = lr * m / (sqrt(v) + eps)
  CHECK(state.m[0].tensor[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(state.v[0].tensor[0] == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(w.arrays[0].tensor[0] == doctest::Approx(1.0 - 0.031623).epsilon(1e-4));
}

TEST_CASE("scalar adam trajectory matches an independent reference") {
  NetworkWeights w = scalar_weights();
  w.arrays[0].tensor[0] = 0.5;
  AdamConfig cfg;
  cfg.lr = 0.003;
  OptimizerState state = OptimizerState::init(w, cfg);

  // Reference recursion, scalar form.
  double rw = 0.5, rm = 0.0, rv = 0.0;
  Rng rng(8);
  for (int step = 0; step < 100; ++step) {
    const double grad = rng.uniform(-2.0, 2.0);
    Gradients g;
    g.arrays.push_back({"w", Tensor({1})});
    g.arrays[0].tensor[0] = grad;
    adam_step(w, g, state);

    rm = 0.9 * rm + 0.1 * grad;
    rv = 0.999 * rv + 0.001 * grad * grad;
    rw = rw - 0.003 * rm / (std::sqrt(rv) + 1e-10);
    CHECK(w.arrays[0].tensor[0] == doctest::Approx(rw).epsilon(1e-12));
  }
}

TEST_CASE("adam at vanishing learning rate is the identity") {
  NetworkWeights w = scalar_weights();
  w.arrays[0].tensor[0] = 0.25;
  AdamConfig cfg;
  cfg.lr = 1e-300;
  OptimizerState state = OptimizerState::init(w, cfg);
  Gradients g;
  g.arrays.push_back({"w", Tensor({1})});
  g.arrays[0].tensor[0] = 3.0;
  adam_step(w, g, state);
  CHECK(w.arrays[0].tensor[0] == 0.25);
}

TEST_CASE("non-finite gradients raise a training error naming the step") {
  NetworkWeights w = scalar_weights();
  AdamConfig cfg;
  cfg.lr = 0.01;
  OptimizerState state = OptimizerState::init(w, cfg);
  Gradients g;
  g.arrays.push_back({"w", Tensor({1})});
  g.arrays[0].tensor[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(w, g, state);
    FAIL("expected TrainError");
  } catch (const TrainError& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("bias correction changes the first step as expected") {
  NetworkWeights w = scalar_weights();
  w.arrays[0].tensor[0] = 0.0;
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.bias_correction = true;
  OptimizerState state = OptimizerState::init(w, cfg);
  Gradients g;
  g.arrays.push_back({"w", Tensor({1})});
  g.arrays[0].tensor[0] = 1.0;
  adam_step(w, g, state);
  // mhat = m/(1-0.9) = 1, vhat = v/(1-0.999) = 1 -> step = lr
  CHECK(w.arrays[0].tensor[0] == doctest::Approx(-0.01).epsilon(1e-9));
}

// ------------------------------------------------------------ augmentation

namespace {

AnnotatedSample geometric_sample() {
  AnnotatedSample s;
  s.image = Image::solid(64, 64, 100, 110, 120);
  fill_circle(s.image, 20.0, 24.0, 4.0, 220, 40, 40);
  s.image_name = "g.ppm";
  s.gesture_class = "SingleEight";
  s.bbox = {0, 0, 64, 64};
  s.code.bits = {1, 1, 0, 0, 0};
  s.fingertips.frame = CoordinateFrame::image_pixels;
  s.fingertips[FingerId::thumb] = {{20.0, 24.0}};
  s.fingertips[FingerId::index] = {{40.0, 30.0}};
  return s;
}

}  // namespace

TEST_CASE("pure translation shifts every fingertip exactly") {
  const AnnotatedSample s = geometric_sample();
  const AffineTransform t = AffineTransform::about_center({31.5, 31.5}, 0.0, 0.0, 1.0, {10.0, 5.0});
  const AnnotatedSample moved = apply_geometric(s, t);
  CHECK((*moved.fingertips[FingerId::thumb])[0] == doctest::Approx(30.0).epsilon(1e-12));
  CHECK((*moved.fingertips[FingerId::thumb])[1] == doctest::Approx(29.0).epsilon(1e-12));
  CHECK((*moved.fingertips[FingerId::index])[0] == doctest::Approx(50.0).epsilon(1e-12));
  CHECK((*moved.fingertips[FingerId::index])[1] == doctest::Approx(35.0).epsilon(1e-12));
  CHECK(moved.code == s.code);
}

TEST_CASE("a 90 degree rotation about the crop center maps (x,y) to (W-1-y,x)") {
  const AnnotatedSample s = geometric_sample();
  const double w = 64.0;
  const double c = (w - 1.0) / 2.0;
  const AffineTransform t = AffineTransform::about_center({c, c}, 90.0, 0.0, 1.0, {0.0, 0.0});
  const AnnotatedSample moved = apply_geometric(s, t);
  const auto& p = *moved.fingertips[FingerId::thumb];
  CHECK(p[0] == doctest::Approx(w - 1.0 - 24.0).epsilon(1e-9));
  CHECK(p[1] == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("identity augmentation returns the sample unchanged") {
  const AnnotatedSample s = geometric_sample();
  AugmentationConfig cfg;
  cfg.max_rotation_deg = 0.0;
  cfg.max_translation_frac = 0.0;
  cfg.max_shear_deg = 0.0;
  cfg.min_scale = 1.0;
  cfg.max_scale = 1.0;
  cfg.illumination = false;
  cfg.gaussian_noise = false;
  cfg.salt_noise = false;
  Rng rng(9);
  const AnnotatedSample out = augment(s, cfg, rng);
  CHECK(out.image == s.image);
  CHECK(out.bbox == s.bbox);
  CHECK(out.fingertips == s.fingertips);
  CHECK(out.code == s.code);
}

TEST_CASE("augmentation preserves visibility popcount and fingertip count") {
  AugmentationConfig cfg;  // defaults: everything on
  for (uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng({seed, 77});
    const AnnotatedSample s = geometric_sample();
    const AnnotatedSample out = augment(s, cfg, rng);
    CHECK(out.code == s.code);
    CHECK(out.fingertips.present_count() == s.fingertips.present_count());
    CHECK(out.code.popcount() == out.fingertips.present_count());
    // accepted geometry keeps visible fingertips inside the box
    for (int f = 0; f < kNumFingers; ++f) {
      if (!out.fingertips.coords[f].has_value()) continue;
      const auto& p = *out.fingertips.coords[f];
      CHECK(out.bbox.contains(p[0], p[1]));
    }
  }
}

TEST_CASE("noise-only augmentation never touches coordinates") {
  AugmentationConfig cfg;
  cfg.geometric = false;
  Rng rng(13);
  const AnnotatedSample s = geometric_sample();
  const AnnotatedSample out = augment(s, cfg, rng);
  CHECK(out.fingertips == s.fingertips);
  CHECK(out.bbox == s.bbox);
}

TEST_CASE("impossible geometry falls back to identity coordinates") {
  AnnotatedSample s = geometric_sample();
  // fingertip flush against the box edge; huge mandatory translation
  s.fingertips[FingerId::thumb] = {{0.5, 0.5}};
  AugmentationConfig cfg;
  cfg.max_rotation_deg = 0.0;
  cfg.max_shear_deg = 0.0;
  cfg.min_scale = 3.0;  // pushes everything out of the canvas
  cfg.max_scale = 3.0;
  cfg.illumination = false;
  cfg.gaussian_noise = false;
  cfg.salt_noise = false;
  Rng rng(21);
  const AnnotatedSample out = augment(s, cfg, rng);
  CHECK(out.fingertips == s.fingertips);
}

// ------------------------------------------------------------ training loop

namespace {

NetworkConfig train_test_config() {
  NetworkConfig c;
  c.input_size = 8;
  c.stages = {{1, 4}};
  c.fc_width = 16;
  c.dropout_rate = 0.0;
  c.upsample_factor = 3;
  return c;
}

TrainData synthetic_train_data(std::vector<AnnotatedSample>& storage, int count) {
  SyntheticConfig cfg;
  cfg.canvas_width = 64;
  cfg.canvas_height = 64;
  cfg.min_box = 32;
  cfg.max_box = 48;
  cfg.marker_radius = 5.0;
  cfg.seed = 3;
  storage = generate_synthetic(cfg, count);
  return TrainData::from_samples(storage);
}

}  // namespace

TEST_CASE("zero epochs returns the initial weights and empty history") {
  std::vector<AnnotatedSample> storage;
  const TrainData data = synthetic_train_data(storage, 4);
  TrainConfig tc;
  tc.epochs = 0;
  tc.seed = 5;
  const TrainResult result = train(data, {}, tc, train_test_config());
  CHECK(result.history.empty());
  const NetworkWeights fresh = build(train_test_config(), 5);
  for (size_t i = 0; i < fresh.arrays.size(); ++i)
    for (int64_t j = 0; j < fresh.arrays[i].tensor.size(); ++j)
      CHECK(result.weights.arrays[i].tensor[j] == fresh.arrays[i].tensor[j]);
}

TEST_CASE("a short run drives the training loss down and records history") {
  std::vector<AnnotatedSample> storage;
  const TrainData data = synthetic_train_data(storage, 8);
  TrainConfig tc;
  tc.epochs = 12;
  tc.batch_size = 8;
  tc.seed = 5;
  tc.augmentation.enabled = false;
  tc.lr_schedule = {{1 << 30, 3e-3}};
  const TrainResult result = train(data, data, tc, train_test_config());
  REQUIRE(result.history.size() == 12);
  CHECK(!result.diverged_at_step.has_value());
  CHECK(result.history.back().train.total < result.history.front().train.total);
  for (const HistoryRow& row : result.history) {
    CHECK(row.train.total == doctest::Approx(row.train.probabilistic + row.train.positional));
    CHECK(row.val.total == doctest::Approx(row.val.probabilistic + row.val.positional));
    CHECK(row.val.total >= 0.0);
  }
}

TEST_CASE("training is deterministic per seed") {
  std::vector<AnnotatedSample> storage;
  const TrainData data = synthetic_train_data(storage, 6);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 3;
  tc.seed = 11;
  tc.lr_schedule = {{1 << 30, 1e-3}};
  const TrainResult a = train(data, {}, tc, train_test_config());
  const TrainResult b = train(data, {}, tc, train_test_config());
  for (size_t i = 0; i < a.weights.arrays.size(); ++i)
    for (int64_t j = 0; j < a.weights.arrays[i].tensor.size(); ++j)
      CHECK(a.weights.arrays[i].tensor[j] == b.weights.arrays[i].tensor[j]);
}

TEST_CASE("max_steps caps the number of optimizer updates") {
  std::vector<AnnotatedSample> storage;
  const TrainData data = synthetic_train_data(storage, 6);
  TrainConfig tc;
  tc.epochs = 100;
  tc.batch_size = 2;
  tc.max_steps = 4;
  tc.seed = 2;
  tc.lr_schedule = {{1 << 30, 1e-3}};
  const TrainResult result = train(data, {}, tc, train_test_config());
  // 3 batches per epoch; the cap stops mid-second-epoch
  CHECK(result.history.size() <= 2);
}

TEST_CASE("learning rate schedule steps down at the configured epochs") {
  TrainConfig tc;
  tc.lr_schedule = {{150, 1e-5}, {250, 1e-6}, {300, 1e-7}};
  CHECK(lr_for_epoch(tc, 1) == 1e-5);
  CHECK(lr_for_epoch(tc, 150) == 1e-5);
  CHECK(lr_for_epoch(tc, 151) == 1e-6);
  CHECK(lr_for_epoch(tc, 250) == 1e-6);
  CHECK(lr_for_epoch(tc, 251) == 1e-7);
  CHECK(lr_for_epoch(tc, 400) == 1e-7);
}

TEST_CASE("history CSV round-trips") {
  History history;
  for (int e = 1; e <= 3; ++e) {
    HistoryRow row;
    row.epoch = e;
    row.train = {0.5 / e, 0.25 / e, 0.75 / e};
    row.val = {0.6 / e, 0.3 / e, 0.9 / e};
    history.push_back(row);
  }
  const auto dir = std::filesystem::temp_directory_path() / "unigest_training_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "history.csv";
  write_history_csv(history, path);
  const History loaded = read_history_csv(path);
  REQUIRE(loaded.size() == history.size());
  for (size_t i = 0; i < history.size(); ++i) {
    CHECK(loaded[i].epoch == history[i].epoch);
    CHECK(loaded[i].train.total == doctest::Approx(history[i].train.total).epsilon(1e-9));
    CHECK(loaded[i].val.probabilistic ==
          doctest::Approx(history[i].val.probabilistic).epsilon(1e-9));
  }
  std::filesystem::remove_all(dir);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "unigest/dataio.hpp"
#include "unigest/errors.hpp"
#include "unigest/evaluation.hpp"
#include "unigest/rng.hpp"

using namespace unigest;

namespace {

const std::vector<std::string> kClasses = {"SingleOne", "SingleTwo",   "SingleThree",
                                           "SingleFour", "SingleFive", "SingleSix",
                                           "SingleSeven", "SingleEight"};

}  // namespace

TEST_CASE("a perfect classifier scores perfectly in every class") {
  std::vector<std::pair<std::string, std::string>> results;
  for (const auto& c : kClasses)
    for (int i = 0; i < 10; ++i) results.emplace_back(c, c);
  const ClassMetrics m = classification_metrics(results, kClasses);
  for (const auto& c : m.per_class) {
    CHECK(c.accuracy == doctest::Approx(1.0));
    CHECK(c.precision == doctest::Approx(1.0));
    CHECK(c.recall == doctest::Approx(1.0));
    CHECK(c.f1 == doctest::Approx(1.0));
    CHECK(!c.degenerate);
  }
  CHECK(m.mean_f1 == doctest::Approx(1.0));
}

TEST_CASE("one false positive among 2930 samples reproduces the printed triplet") {
  // 337 positives for SingleOne, one foreign sample predicted as SingleOne,
  // everything else correct.
  std::vector<std::pair<std::string, std::string>> results;
  for (int i = 0; i < 337; ++i) results.emplace_back("SingleOne", "SingleOne");
  results.emplace_back("SingleTwo", "SingleOne");  // the FP
  const int remaining = 2930 - 337 - 1;
  for (int i = 0; i < remaining; ++i) {
    const std::string& c = kClasses[1 + static_cast<size_t>(i) % 7];
    results.emplace_back(c, c);
  }
  REQUIRE(results.size() == 2930);
  const ClassMetrics m = classification_metrics(results, kClasses);
  const auto& one = m.per_class[0];
  CHECK(one.tp == 337);
  CHECK(one.fp == 1);
  CHECK(one.fn == 0);
  CHECK(one.accuracy * 100.0 == doctest::Approx(99.97).epsilon(1e-4));
  CHECK(one.precision * 100.0 == doctest::Approx(99.70).epsilon(1e-4));
  CHECK(one.recall * 100.0 == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("a three-sample toy case matches the hand-counted table") {
  const std::vector<std::string> classes = {"a", "b", "c"};
  const std::vector<std::pair<std::string, std::string>> results = {
      {"a", "a"}, {"b", "c"}, {"c", "c"}};
  const ClassMetrics m = classification_metrics(results, classes);
  // a: TP1 FP0 FN0 TN2; b: TP0 FP0 FN1 TN2; c: TP1 FP1 FN0 TN1
  CHECK(m.per_class[0].tp == 1);
  CHECK(m.per_class[0].tn == 2);
  CHECK(m.per_class[0].accuracy == doctest::Approx(1.0));
  CHECK(m.per_class[1].fn == 1);
  CHECK(m.per_class[1].precision == 0.0);
  CHECK(m.per_class[1].degenerate);  // no positive predictions for b
  CHECK(m.per_class[2].fp == 1);
  CHECK(m.per_class[2].precision == doctest::Approx(0.5));
  CHECK(m.per_class[2].recall == doctest::Approx(1.0));
}

TEST_CASE("F1 equals the harmonic mean whenever defined") {
  Rng rng(4);
  std::vector<std::pair<std::string, std::string>> results;
  for (int i = 0; i < 500; ++i) {
    const auto& truth = kClasses[static_cast<size_t>(rng.uniform_int(8))];
    const auto& pred = kClasses[static_cast<size_t>(rng.uniform_int(8))];
    results.emplace_back(truth, pred);
  }
  const ClassMetrics m = classification_metrics(results, kClasses);
  for (const auto& c : m.per_class) {
    if (c.precision + c.recall > 0.0)
      CHECK(c.f1 ==
            doctest::Approx(2.0 * c.precision * c.recall / (c.precision + c.recall)).epsilon(1e-12));
  }
}

TEST_CASE("empty result lists are rejected") {
  CHECK_THROWS_AS(classification_metrics({}, kClasses), InputError);
}

namespace {

LabeledDetection make_detection(const std::string& cls, const GestureCode& code,
                                std::vector<std::array<double, 2>> truth_points,
                                std::vector<std::array<double, 2>> detected_points,
                                bool correct_code = true) {
  LabeledDetection d;
  d.true_class = cls;
  d.true_code = code;
  d.truth.frame = CoordinateFrame::image_pixels;
  d.result.fingertips.frame = CoordinateFrame::image_pixels;
  d.result.code = code;
  if (!correct_code) d.result.code.bits[0] ^= 1;
  d.result.gesture_class = cls;
  size_t point = 0;
  for (int f = 0; f < kNumFingers; ++f) {
    if (code.bits[f] == 0) continue;
    d.truth.coords[f] = truth_points[point];
    d.result.fingertips.coords[f] = detected_points[point];
    ++point;
  }
  return d;
}

}  // namespace

TEST_CASE("exact detections give a zero pixel error") {
  const GestureCode code{{1, 1, 0, 0, 0}};
  std::vector<LabeledDetection> results = {
      make_detection("SingleEight", code, {{{10, 10}}, {{30, 40}}}, {{{10, 10}}, {{30, 40}}})};
  const PixelErrorReport r = pixel_error(results, kClasses);
  const auto& eight = r.per_class[7];
  REQUIRE(eight.present);
  CHECK(eight.mean == 0.0);
  CHECK(eight.stddev == 0.0);
}

TEST_CASE("two visible fingers offset by (3,4) and (0,0) average to 2.5 px") {
  const GestureCode code{{1, 1, 0, 0, 0}};
  std::vector<LabeledDetection> results = {
      make_detection("SingleEight", code, {{{10, 10}}, {{30, 40}}}, {{{13, 14}}, {{30, 40}}})};
  const PixelErrorReport r = pixel_error(results, kClasses);
  const auto& eight = r.per_class[7];
  REQUIRE(eight.present);
  CHECK(eight.fingers == 2);
  CHECK(eight.mean == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(eight.stddev == doctest::Approx(2.5).epsilon(1e-12));  // distances 5 and 0
}

TEST_CASE("misrecognized samples are excluded from the pixel error") {
  const GestureCode code{{1, 1, 0, 0, 0}};
  std::vector<LabeledDetection> results = {
      make_detection("SingleEight", code, {{{10, 10}}, {{30, 40}}}, {{{13, 14}}, {{30, 40}}}),
      make_detection("SingleEight", code, {{{10, 10}}, {{30, 40}}}, {{{99, 99}}, {{99, 99}}},
                     /*correct_code=*/false)};
  const PixelErrorReport r = pixel_error(results, kClasses);
  CHECK(r.per_class[7].mean == doctest::Approx(2.5));
  CHECK(r.per_class[7].samples == 1);
  CHECK(r.excluded_samples == 1);
}

TEST_CASE("classes without correct recognitions are reported absent") {
  const GestureCode code{{1, 0, 0, 0, 0}};
  std::vector<LabeledDetection> results = {
      make_detection("SingleOne", code, {{{5, 5}}}, {{{6, 6}}}, /*correct_code=*/false)};
  const PixelErrorReport r = pixel_error(results, kClasses);
  CHECK(!r.per_class[0].present);
  CHECK(r.overall_mean == 0.0);
}

TEST_CASE("pixel error is translation consistent") {
  const GestureCode code{{1, 1, 1, 0, 0}};
  auto build_results = [&](double dx, double dy) {
    std::vector<LabeledDetection> results;
    Rng inner(17);
    for (int i = 0; i < 10; ++i) {
      std::vector<std::array<double, 2>> truth, detected;
      for (int f = 0; f < 3; ++f) {
        const double x = inner.uniform(0.0, 100.0), y = inner.uniform(0.0, 100.0);
        truth.push_back({x + dx, y + dy});
        detected.push_back({x + dx + inner.uniform(-3.0, 3.0), y + dy + inner.uniform(-3.0, 3.0)});
      }
      results.push_back(make_detection("SingleThree", code, truth, detected));
    }
    return results;
  };
  // build_results reseeds internally, so both runs share the same noise.
  const PixelErrorReport a = pixel_error(build_results(0.0, 0.0), kClasses);
  const PixelErrorReport b = pixel_error(build_results(250.0, -80.0), kClasses);
  CHECK(a.per_class[2].mean == doctest::Approx(b.per_class[2].mean).epsilon(1e-9));
  CHECK(a.per_class[2].stddev == doctest::Approx(b.per_class[2].stddev).epsilon(1e-9));
}

TEST_CASE("confusion matrices count rows as actual and columns as predicted") {
  std::vector<std::pair<std::string, std::string>> results;
  for (const auto& c : kClasses)
    for (int i = 0; i < 5; ++i) results.emplace_back(c, c);
  results.emplace_back("SingleOne", "SingleTwo");
  results.emplace_back("SingleOne", "unknown");
  const ConfusionMatrix m = confusion_matrix(results, kClasses);
  CHECK(m.total() == static_cast<int64_t>(results.size()));
  CHECK(m.row_sum(0) == 7);
  CHECK(m.counts[0][0] == 5);
  CHECK(m.counts[0][1] == 1);
  CHECK(m.counts[0][8] == 1);  // trailing unknown column
  for (size_t r = 1; r < kClasses.size(); ++r) {
    CHECK(m.row_sum(r) == 5);
    CHECK(m.counts[r][r] == 5);
  }
  CHECK_THROWS_AS(confusion_matrix({{"NotAClass", "SingleOne"}}, kClasses), InputError);
}

TEST_CASE("variant names parse and unknown names are configuration errors") {
  CHECK(variant_from_name("proposed") == AblationVariant::proposed);
  CHECK(variant_from_name("averaging-layer") == AblationVariant::averaging_layer);
  CHECK(variant_from_name("random-ensemble") == AblationVariant::random_ensemble_sample);
  CHECK(variant_from_name("direct-fc") == AblationVariant::direct_fc_regression);
  CHECK_THROWS_AS(variant_from_name("heatmap"), ConfigError);
}

namespace {

NetworkConfig micro_config() {
  NetworkConfig c;
  c.input_size = 8;
  c.stages = {{1, 2}};
  c.fc_width = 8;
  c.dropout_rate = 0.0;
  c.upsample_factor = 3;
  return c;
}

}  // namespace

TEST_CASE("the averaging-layer variant matches the proposed post-processing") {
  const VariantSetup proposed = build_variant(AblationVariant::proposed, micro_config(), 42);
  const VariantSetup averaging =
      build_variant(AblationVariant::averaging_layer, micro_config(), 42);

  Rng rng(6);
  Tensor batch({2, 3, 8, 8});
  for (int64_t i = 0; i < batch.size(); ++i) batch[i] = rng.uniform();

  const ForwardResult a = forward(proposed.weights, batch);
  const ForwardResult b = forward(averaging.weights, batch);
  for (int bi = 0; bi < 2; ++bi) {
    const auto post = ensemble_average(ensemble_from_output(a.positions, bi));
    for (int col = 0; col < kEnsembleSide; ++col)
      CHECK(b.averaged[bi * kEnsembleSide + col] ==
            doctest::Approx(post[static_cast<size_t>(col)]).epsilon(1e-6));
  }
}

TEST_CASE("the direct regression variant emits bounded coordinates") {
  const VariantSetup direct =
      build_variant(AblationVariant::direct_fc_regression, micro_config(), 7);
  CHECK(direct.post.mode == PostProcess::Mode::direct);
  Rng rng(7);
  Tensor batch({1, 3, 8, 8});
  for (int64_t i = 0; i < batch.size(); ++i) batch[i] = rng.uniform();
  const ForwardResult out = forward(direct.weights, batch);
  REQUIRE(out.positions.shape() == std::vector<int>{1, 10});
  for (int64_t i = 0; i < out.positions.size(); ++i) {
    CHECK(out.positions[i] > 0.0);
    CHECK(out.positions[i] < 1.0);
  }
}

TEST_CASE("the random-row variant is wired with the seed") {
  const VariantSetup v = build_variant(AblationVariant::random_ensemble_sample, micro_config(), 9);
  CHECK(v.post.mode == PostProcess::Mode::random_row);
  CHECK(v.post.row_seed == 9);
}

TEST_CASE("the benchmark reports parameters and a cheap post-processing stage") {
  SyntheticConfig synth;
  synth.canvas_width = 96;
  synth.canvas_height = 80;
  synth.min_box = 48;
  synth.max_box = 64;
  synth.marker_radius = 5.0;
  synth.seed = 1;
  const auto samples = generate_synthetic(synth, 4);

  GroundTruthDetector detector;
  std::vector<const Image*> images;
  std::vector<std::string> ids;
  for (const auto& s : samples) {
    detector.add(s.image_name, s.bbox);
    images.push_back(&s.image);
    ids.push_back(s.image_name);
  }
  const NetworkWeights weights = build(NetworkConfig::compact(), 3);
  const TimingReport report = benchmark(weights, detector, images, ids, 10, 2);
  CHECK(report.parameters == parameter_count(NetworkConfig::compact()));
  CHECK(report.images == 10);
  CHECK(report.forward_ms_mean > 0.0);
  // ensemble averaging is ~100 multiply-adds; the forward pass dwarfs it
  CHECK(report.post_us_mean / 1000.0 < report.forward_ms_mean);
  CHECK_THROWS_AS(benchmark(weights, detector, images, ids, 5), InputError);
}

TEST_CASE("report tables render without blowing up") {
  std::vector<std::pair<std::string, std::string>> results;
  for (const auto& c : kClasses) results.emplace_back(c, c);
  const ClassMetrics m = classification_metrics(results, kClasses);
  const std::string table = render_classification_table(m);
  CHECK(table.find("SingleOne") != std::string::npos);
  CHECK(table.find("Mean") != std::string::npos);

  const ConfusionMatrix cm = confusion_matrix(results, kClasses);
  const std::string rendered = render_confusion_table(cm);
  CHECK(rendered.find("unknown") != std::string::npos);
}

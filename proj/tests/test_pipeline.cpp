#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "unigest/errors.hpp"
#include "unigest/pipeline.hpp"
#include "unigest/rng.hpp"

using namespace unigest;

TEST_CASE("the ensemble average of identical rows is that row") {
  std::array<double, kEnsembleSide> row{};
  Rng rng(1);
  for (auto& v : row) v = rng.uniform();
  const EnsemblePositionMatrix m = EnsemblePositionMatrix::stacked(row);
  const auto avg = ensemble_average(m);
  for (int i = 0; i < kEnsembleSide; ++i)
    CHECK(avg[static_cast<size_t>(i)] ==
          doctest::Approx(row[static_cast<size_t>(i)]).epsilon(1e-15));
  const auto zero = ensemble_average(EnsemblePositionMatrix{});
  for (double v : zero) CHECK(v == 0.0);
}

TEST_CASE("the ensemble average matches a column-mean oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    EnsemblePositionMatrix m;
    for (auto& v : m.values) v = rng.uniform(-10.0, 10.0);
    const auto avg = ensemble_average(m);
    for (int col = 0; col < kEnsembleSide; ++col) {
      double acc = 0.0;
      for (int row = 0; row < kEnsembleSide; ++row) acc += m.at(row, col);
      CHECK(avg[static_cast<size_t>(col)] ==
            doctest::Approx(acc / kEnsembleSide).epsilon(1e-9));
    }
  }
}

TEST_CASE("the ensemble average is exactly invariant under row permutation") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    EnsemblePositionMatrix m;
    for (auto& v : m.values) v = rng.uniform(-5.0, 5.0);
    std::array<int, kEnsembleSide> perm;
    for (int i = 0; i < kEnsembleSide; ++i) perm[static_cast<size_t>(i)] = i;
    for (int i = kEnsembleSide - 1; i > 0; --i)
      std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(rng.uniform_int(i + 1))]);
    EnsemblePositionMatrix shuffled;
    for (int r = 0; r < kEnsembleSide; ++r)
      for (int c = 0; c < kEnsembleSide; ++c)
        shuffled.at(r, c) = m.at(perm[static_cast<size_t>(r)], c);
    const auto a = ensemble_average(m);
    const auto b = ensemble_average(shuffled);
    for (int i = 0; i < kEnsembleSide; ++i)
      CHECK(a[static_cast<size_t>(i)] == b[static_cast<size_t>(i)]);  // bitwise
  }
}

TEST_CASE("a single-entry perturbation moves the average by exactly delta/10") {
  Rng rng(4);
  EnsemblePositionMatrix m;
  for (auto& v : m.values) v = rng.uniform();
  const auto base = ensemble_average(m);
  const double delta = 0.625;  // exactly representable
  EnsemblePositionMatrix perturbed = m;
  perturbed.at(3, 7) += delta;
  const auto shifted = ensemble_average(perturbed);
  CHECK(shifted[7] == doctest::Approx(base[7] + delta / 10.0).epsilon(1e-12));
  for (int i = 0; i < kEnsembleSide; ++i)
    if (i != 7) CHECK(shifted[static_cast<size_t>(i)] == base[static_cast<size_t>(i)]);
}

TEST_CASE("crop of an already-sized box is pixel identical") {
  Rng rng(5);
  Image img(200, 160);
  for (auto& px : img.pixels) px = static_cast<uint8_t>(rng.uniform_int(256));
  const BoundingBox box{30, 20, 30 + 128, 20 + 128};
  const Crop crop = crop_and_resize(img, box, 128);
  CHECK(crop.box == box);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x)
      for (int c = 0; c < 3; ++c) CHECK(crop.image.px(x, y)[c] == img.px(30 + x, 20 + y)[c]);
}

TEST_CASE("crop of a constant image is constant") {
  const Image img = Image::solid(300, 300, 17, 130, 200);
  const Crop crop = crop_and_resize(img, {10, 10, 266, 266}, 128);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      CHECK(crop.image.px(x, y)[0] == 17);
      CHECK(crop.image.px(x, y)[1] == 130);
      CHECK(crop.image.px(x, y)[2] == 200);
    }
}

TEST_CASE("checkerboard downscale matches an independent bilinear oracle") {
  Image img(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const uint8_t v = ((x / 8) + (y / 8)) % 2 == 0 ? 255 : 0;
      img.set(x, y, v, v, v);
    }
  const BoundingBox box{0, 0, 64, 64};
  const int out = 24;
  const Crop crop = crop_and_resize(img, box, out);

  // Straight-line reimplementation of half-pixel bilinear sampling.
  const double scale = 64.0 / out;
  for (int oy = 0; oy < out; ++oy) {
    for (int ox = 0; ox < out; ++ox) {
      double fx = std::clamp((ox + 0.5) * scale - 0.5, 0.0, 63.0);
      double fy = std::clamp((oy + 0.5) * scale - 0.5, 0.0, 63.0);
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const int x1 = std::min(x0 + 1, 63), y1 = std::min(y0 + 1, 63);
      const double ax = fx - x0, ay = fy - y0;
      const double v = img.px(x0, y0)[0] * (1 - ax) * (1 - ay) +
                       img.px(x1, y0)[0] * ax * (1 - ay) +
                       img.px(x0, y1)[0] * (1 - ax) * ay + img.px(x1, y1)[0] * ax * ay;
      CHECK(std::abs(crop.image.px(ox, oy)[0] - v) <= 1.0);
    }
  }
}

TEST_CASE("degenerate boxes are rejected") {
  const Image img = Image::solid(100, 100, 0, 0, 0);
  CHECK_THROWS_AS(crop_and_resize(img, {50, 50, 50, 80}, 32), InputError);
  CHECK_THROWS_AS(crop_and_resize(img, {200, 200, 300, 300}, 32), InputError);
}

TEST_CASE("coordinate transforms round-trip to 1e-9") {
  const BoundingBox box{100, 50, 300, 200};
  Rng rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::array<double, 2> normalized{rng.uniform(), rng.uniform()};
    const auto px = to_image_pixels(normalized, box);
    const auto back = to_normalized(px, box);
    CHECK(back[0] == doctest::Approx(normalized[0]).epsilon(1e-9));
    CHECK(back[1] == doctest::Approx(normalized[1]).epsilon(1e-9));
  }
}

TEST_CASE("assemble_result applies the back-transform only to visible fingers") {
  FingerProbabilities probs{{1.0, 1.0, 0.0, 0.0, 1.0}};
  std::array<double, kEnsembleSide> coords{};
  coords.fill(0.5);
  const BoundingBox box{100, 50, 300, 200};  // width 200, height 150
  const GestureRegistry registry = GestureRegistry::default_registry();
  const DetectionResult result = assemble_result(probs, coords, box, Threshold{}, registry);

  CHECK(result.code == GestureCode{{1, 1, 0, 0, 1}});
  CHECK(result.gesture_class == "SingleSeven");
  CHECK(result.fingertips.frame == CoordinateFrame::image_pixels);
  for (FingerId f : {FingerId::thumb, FingerId::index, FingerId::pinky}) {
    REQUIRE(result.fingertips[f].has_value());
    CHECK((*result.fingertips[f])[0] == doctest::Approx(200.0));
    CHECK((*result.fingertips[f])[1] == doctest::Approx(125.0));
  }
  CHECK(!result.fingertips[FingerId::middle].has_value());
  CHECK(!result.fingertips[FingerId::ring].has_value());
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

TEST_CASE("detect returns nothing when the detector finds no hand") {
  const NetworkWeights w = build(micro_config(), 1);
  GroundTruthDetector detector;  // empty lookup
  const Image img = Image::solid(64, 64, 50, 50, 50);
  const auto result = detect(img, "missing.ppm", detector, w,
                             GestureRegistry::default_registry());
  CHECK(!result.has_value());
}

TEST_CASE("detection results satisfy the code/fingertip invariant for random weights") {
  const GestureRegistry registry = GestureRegistry::default_registry();
  const Image img = Image::solid(64, 64, 120, 100, 90);
  GroundTruthDetector detector;
  detector.add("x.ppm", {8, 8, 56, 56});
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const NetworkWeights w = build(micro_config(), seed);
    const auto result = detect(img, "x.ppm", detector, w, registry);
    REQUIRE(result.has_value());
    for (int f = 0; f < kNumFingers; ++f)
      CHECK((result->code.bits[f] == 1) == result->fingertips.coords[f].has_value());
    CHECK(result->gesture_class == classify(result->code, registry));
  }
}

TEST_CASE("boxes overlapping the border are clipped before cropping") {
  const NetworkWeights w = build(micro_config(), 3);
  GroundTruthDetector detector;
  detector.add("edge.ppm", {-10, -10, 40, 40});
  const Image img = Image::solid(64, 64, 90, 90, 90);
  const auto result = detect(img, "edge.ppm", detector, w, GestureRegistry::default_registry());
  REQUIRE(result.has_value());
  // fully out-of-frame boxes clip to nothing
  detector.add("gone.ppm", {-50, -50, -10, -10});
  CHECK(!detect(img, "gone.ppm", detector, w, GestureRegistry::default_registry()).has_value());
}

TEST_CASE("file-based boxes drive detection and bad files are rejected") {
  const auto dir = std::filesystem::temp_directory_path() / "unigest_pipeline_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "boxes.jsonl";
  {
    std::ofstream out(path);
    out << R"({"image": "a.ppm", "bbox": [4, 4, 60, 60]})" << "\n";
    out << "\n";
    out << R"({"image": "b.ppm", "bbox": [0, 0, 32, 32]})" << "\n";
  }
  FileBoxDetector detector = FileBoxDetector::from_jsonl(path);
  const Image img = Image::solid(64, 64, 10, 10, 10);
  CHECK(detector.detect(img, "a.ppm").has_value());
  CHECK(detector.detect(img, "b.ppm").has_value());
  CHECK(!detector.detect(img, "c.ppm").has_value());

  {
    std::ofstream out(path);
    out << R"({"image": "a.ppm", "bbox": [4, 4]})" << "\n";
  }
  CHECK_THROWS_AS(FileBoxDetector::from_jsonl(path), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("detect_batch treats images independently") {
  const NetworkWeights w = build(micro_config(), 5);
  const GestureRegistry registry = GestureRegistry::default_registry();
  const Image a = Image::solid(64, 64, 200, 10, 10);
  const Image b = Image::solid(64, 64, 10, 200, 10);
  GroundTruthDetector detector;
  detector.add("a", {0, 0, 64, 64});
  // no box for "b"
  const auto results = detect_batch({&a, &b}, {"a", "b"}, detector, w, registry);
  REQUIRE(results.size() == 2);
  CHECK(results[0].has_value());
  CHECK(!results[1].has_value());

  const auto solo = detect(a, "a", detector, w, registry);
  REQUIRE(solo.has_value());
  for (int i = 0; i < kNumFingers; ++i)
    CHECK(solo->raw_probabilities.p[i] == results[0]->raw_probabilities.p[i]);
}

TEST_CASE("shared weights serve concurrent detections identically") {
  const NetworkWeights w = build(micro_config(), 8);
  const GestureRegistry registry = GestureRegistry::default_registry();
  const Image img = Image::solid(64, 64, 140, 90, 70);
  GroundTruthDetector detector;
  detector.add("x", {4, 4, 60, 60});
  const auto reference = detect(img, "x", detector, w, registry);
  REQUIRE(reference.has_value());

  std::array<bool, 8> same{};
#pragma omp parallel for
  for (int i = 0; i < 8; ++i) {
    GroundTruthDetector local;
    local.add("x", {4, 4, 60, 60});
    const auto r = detect(img, "x", local, w, registry);
    bool ok = r.has_value() && r->code == reference->code;
    if (ok)
      for (int f = 0; f < kNumFingers; ++f)
        if (r->raw_probabilities.p[f] != reference->raw_probabilities.p[f]) ok = false;
    same[static_cast<size_t>(i)] = ok;
  }
  for (bool ok : same) CHECK(ok);
}

TEST_CASE("random-row post-processing is reproducible per seed") {
  const NetworkWeights w = build(micro_config(), 6);
  const GestureRegistry registry = GestureRegistry::default_registry();
  const Image img = Image::solid(64, 64, 60, 120, 180);
  GroundTruthDetector detector;
  detector.add("x", {0, 0, 64, 64});

  PostProcess post_a;
  post_a.mode = PostProcess::Mode::random_row;
  post_a.row_seed = 42;
  PostProcess post_b;
  post_b.mode = PostProcess::Mode::random_row;
  post_b.row_seed = 42;

  const auto a = detect(img, "x", detector, w, registry, Threshold{}, post_a);
  const auto b = detect(img, "x", detector, w, registry, Threshold{}, post_b);
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  for (int f = 0; f < kNumFingers; ++f) {
    CHECK(a->fingertips.coords[f].has_value() == b->fingertips.coords[f].has_value());
    if (a->fingertips.coords[f].has_value()) {
      CHECK((*a->fingertips.coords[f])[0] == (*b->fingertips.coords[f])[0]);
      CHECK((*a->fingertips.coords[f])[1] == (*b->fingertips.coords[f])[1]);
    }
  }
}

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "unigest/core.hpp"
#include "unigest/gesture_codec.hpp"
#include "unigest/model.hpp"
#include "unigest/pipeline.hpp"

namespace unigest {

// One-vs-rest classification metrics per gesture class over the full
// result set. Ratios with a zero denominator are reported as 0 and
// flagged. "unknown" predictions count as negatives for every class.
struct ClassMetrics {
  struct PerClass {
    std::string name;
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    double accuracy = 0.0;   // (TP+TN)/total
    double precision = 0.0;  // TP/(TP+FP)
    double recall = 0.0;     // TP/(TP+FN)
    double f1 = 0.0;         // harmonic mean of precision and recall
    bool degenerate = false;
  };
  std::vector<PerClass> per_class;
  double mean_accuracy = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f1 = 0.0;
  int64_t total = 0;
};

ClassMetrics classification_metrics(
    const std::vector<std::pair<std::string, std::string>>& true_pred,
    const std::vector<std::string>& classes);

// A detection paired with its ground truth, in image pixels.
struct LabeledDetection {
  std::string true_class;
  GestureCode true_code;
  FingertipSet truth;
  DetectionResult result;
};

// Mean Euclidean fingertip error in pixels, computed per class over the
// correctly recognized gestures only (predicted code equals true code);
// misrecognized samples are excluded from both mean and std.
struct PixelErrorReport {
  struct PerClass {
    std::string name;
    bool present = false;  // false when a class has no correct recognitions
    double mean = 0.0;
    double stddev = 0.0;  // over per-finger distances
    int64_t fingers = 0;
    int64_t samples = 0;
  };
  std::vector<PerClass> per_class;
  double overall_mean = 0.0;    // mean of the present per-class means
  double overall_stddev = 0.0;  // mean of the present per-class stds
  int64_t evaluated_samples = 0;
  int64_t excluded_samples = 0;
};

PixelErrorReport pixel_error(const std::vector<LabeledDetection>& results,
                             const std::vector<std::string>& classes);

// Rows are actual classes in the given order; columns are the same
// classes plus a trailing "unknown" column.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<int64_t>> counts;

  int64_t total() const;
  int64_t row_sum(size_t row) const;
};

ConfusionMatrix confusion_matrix(const std::vector<std::pair<std::string, std::string>>& true_pred,
                                 const std::vector<std::string>& classes);

enum class AblationVariant {
  averaging_layer,         // ensemble average moved inside the network
  random_ensemble_sample,  // one seeded ensemble row instead of the mean
  direct_fc_regression,    // FC(10)+sigmoid head, no ensemble
  proposed
};

AblationVariant variant_from_name(const std::string& name);  // throws ConfigError
const char* variant_name(AblationVariant variant);

struct VariantSetup {
  NetworkWeights weights;
  PostProcess post;
};

// Builds the network weights and post-processing override for a variant.
// Identical seeds give byte-identical shared arrays, so the averaging
// variant runs on the same weights as the proposed method.
VariantSetup build_variant(AblationVariant variant, const NetworkConfig& base, uint64_t seed);

// Per-stage wall-clock timing over n_images detections, after `warmup`
// excluded iterations. Absolute numbers are hardware-dependent and are
// reported, never asserted.
struct TimingReport {
  int64_t parameters = 0;
  int images = 0;
  int warmup = 0;
  double detector_ms_mean = 0.0, detector_ms_std = 0.0;
  double forward_ms_mean = 0.0, forward_ms_std = 0.0;
  double post_us_mean = 0.0, post_us_std = 0.0;
  double total_ms_mean = 0.0;
};

TimingReport benchmark(const NetworkWeights& weights, HandDetector& detector,
                       const std::vector<const Image*>& images,
                       const std::vector<std::string>& image_ids, int n_images, int warmup = 10);

std::string render_classification_table(const ClassMetrics& metrics);
std::string render_pixel_error_table(const PixelErrorReport& report);
std::string render_confusion_table(const ConfusionMatrix& matrix);
std::string render_timing_table(const TimingReport& report);

}  // namespace unigest

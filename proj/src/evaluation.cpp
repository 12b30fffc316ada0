#include "unigest/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "unigest/errors.hpp"

namespace unigest {

ClassMetrics classification_metrics(
    const std::vector<std::pair<std::string, std::string>>& true_pred,
    const std::vector<std::string>& classes) {
  if (true_pred.empty()) throw InputError("classification_metrics: empty result list");
  ClassMetrics metrics;
  metrics.total = static_cast<int64_t>(true_pred.size());
  for (const std::string& name : classes) {
    ClassMetrics::PerClass c;
    c.name = name;
    for (const auto& [truth, pred] : true_pred) {
      const bool is_true = truth == name;
      const bool is_pred = pred == name;
      if (is_true && is_pred)
        ++c.tp;
      else if (!is_true && is_pred)
        ++c.fp;
      else if (is_true && !is_pred)
        ++c.fn;
      else
        ++c.tn;
    }
    c.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(metrics.total);
    if (c.tp + c.fp > 0) {
      c.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    } else {
      c.degenerate = true;
    }
    if (c.tp + c.fn > 0) {
      c.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    } else {
      c.degenerate = true;
    }
    if (c.precision + c.recall > 0.0) {
      c.f1 = 2.0 * c.precision * c.recall / (c.precision + c.recall);
    } else {
      c.degenerate = true;
    }
    metrics.per_class.push_back(c);
  }
  if (!metrics.per_class.empty()) {
    for (const auto& c : metrics.per_class) {
      metrics.mean_accuracy += c.accuracy;
      metrics.mean_precision += c.precision;
      metrics.mean_recall += c.recall;
      metrics.mean_f1 += c.f1;
    }
    const double n = static_cast<double>(metrics.per_class.size());
    metrics.mean_accuracy /= n;
    metrics.mean_precision /= n;
    metrics.mean_recall /= n;
    metrics.mean_f1 /= n;
  }
  return metrics;
}

PixelErrorReport pixel_error(const std::vector<LabeledDetection>& results,
                             const std::vector<std::string>& classes) {
  PixelErrorReport report;
  for (const std::string& name : classes) {
    PixelErrorReport::PerClass c;
    c.name = name;
    std::vector<double> distances;
    for (const LabeledDetection& r : results) {
      if (r.true_class != name) continue;
      if (!(r.result.code == r.true_code)) {
        ++report.excluded_samples;
        continue;
      }
      ++report.evaluated_samples;
      ++c.samples;
      for (int f = 0; f < kNumFingers; ++f) {
        if (r.true_code.bits[f] == 0) continue;
        if (!r.truth.coords[f].has_value() || !r.result.fingertips.coords[f].has_value())
          throw InputError("pixel_error: visible finger without coordinates");
        const auto& gt = *r.truth.coords[f];
        const auto& det = *r.result.fingertips.coords[f];
        const double dx = gt[0] - det[0];
        const double dy = gt[1] - det[1];
        distances.push_back(std::sqrt(dx * dx + dy * dy));
      }
    }
    if (!distances.empty()) {
      c.present = true;
      c.fingers = static_cast<int64_t>(distances.size());
      double sum = 0.0;
      for (double d : distances) sum += d;
      c.mean = sum / static_cast<double>(distances.size());
      double var = 0.0;
      for (double d : distances) var += (d - c.mean) * (d - c.mean);
      c.stddev = std::sqrt(var / static_cast<double>(distances.size()));
    }
    report.per_class.push_back(c);
  }
  int present = 0;
  for (const auto& c : report.per_class) {
    if (!c.present) continue;
    report.overall_mean += c.mean;
    report.overall_stddev += c.stddev;
    ++present;
  }
  if (present > 0) {
    report.overall_mean /= present;
    report.overall_stddev /= present;
  }
  return report;
}

int64_t ConfusionMatrix::total() const {
  int64_t n = 0;
  for (const auto& row : counts)
    for (int64_t v : row) n += v;
  return n;
}

int64_t ConfusionMatrix::row_sum(size_t row) const {
  int64_t n = 0;
  for (int64_t v : counts[row]) n += v;
  return n;
}

ConfusionMatrix confusion_matrix(const std::vector<std::pair<std::string, std::string>>& true_pred,
                                 const std::vector<std::string>& classes) {
  ConfusionMatrix m;
  m.classes = classes;
  m.counts.assign(classes.size(), std::vector<int64_t>(classes.size() + 1, 0));
  auto index_of = [&classes](const std::string& name) -> int {
    for (size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == name) return static_cast<int>(i);
    return -1;
  };
  for (const auto& [truth, pred] : true_pred) {
    const int row = index_of(truth);
    if (row < 0) throw InputError("confusion_matrix: unregistered true class " + truth);
    int col = index_of(pred);
    if (col < 0) col = static_cast<int>(classes.size());  // trailing unknown column
    ++m.counts[static_cast<size_t>(row)][static_cast<size_t>(col)];
  }
  return m;
}

AblationVariant variant_from_name(const std::string& name) {
  if (name == "averaging-layer") return AblationVariant::averaging_layer;
  if (name == "random-ensemble") return AblationVariant::random_ensemble_sample;
  if (name == "direct-fc") return AblationVariant::direct_fc_regression;
  if (name == "proposed") return AblationVariant::proposed;
  throw ConfigError("unknown ablation variant '" + name +
                    "' (expected averaging-layer, random-ensemble, direct-fc or proposed)");
}

const char* variant_name(AblationVariant variant) {
  switch (variant) {
    case AblationVariant::averaging_layer: return "averaging-layer";
    case AblationVariant::random_ensemble_sample: return "random-ensemble";
    case AblationVariant::direct_fc_regression: return "direct-fc";
    case AblationVariant::proposed: return "proposed";
  }
  return "?";
}

VariantSetup build_variant(AblationVariant variant, const NetworkConfig& base, uint64_t seed) {
  VariantSetup setup;
  NetworkConfig cfg = base;
  switch (variant) {
    case AblationVariant::proposed:
      cfg.average_in_network = false;
      cfg.regression_head = RegressionHead::ensemble_conv;
      setup.post.mode = PostProcess::Mode::ensemble_mean;
      break;
    case AblationVariant::averaging_layer:
      cfg.average_in_network = true;
      cfg.regression_head = RegressionHead::ensemble_conv;
      setup.post.mode = PostProcess::Mode::network_average;
      break;
    case AblationVariant::random_ensemble_sample:
      cfg.average_in_network = false;
      cfg.regression_head = RegressionHead::ensemble_conv;
      setup.post.mode = PostProcess::Mode::random_row;
      setup.post.row_seed = seed;
      break;
    case AblationVariant::direct_fc_regression:
      cfg.average_in_network = false;
      cfg.regression_head = RegressionHead::direct_fc;
      setup.post.mode = PostProcess::Mode::direct;
      break;
  }
  setup.weights = build(cfg, seed);
  return setup;
}

TimingReport benchmark(const NetworkWeights& weights, HandDetector& detector,
                       const std::vector<const Image*>& images,
                       const std::vector<std::string>& image_ids, int n_images, int warmup) {
  if (images.empty() || images.size() != image_ids.size())
    throw InputError("benchmark: need a non-empty image list with matching ids");
  if (n_images < 10) throw InputError("benchmark: need at least 10 timed images");

  using clock = std::chrono::steady_clock;
  const GestureRegistry registry = GestureRegistry::default_registry();
  std::vector<double> det_ms, fwd_ms, post_us;
  det_ms.reserve(static_cast<size_t>(n_images));

  for (int i = 0; i < warmup + n_images; ++i) {
    const size_t idx = static_cast<size_t>(i) % images.size();
    const Image& image = *images[idx];

    const auto t0 = clock::now();
    const auto box = detector.detect(image, image_ids[idx]);
    const auto t1 = clock::now();
    if (!box) continue;
    const BoundingBox clipped = box->clipped(image.width, image.height);
    const Crop crop = crop_and_resize(image, clipped, weights.config.input_size);
    const Tensor batch = to_input_tensor(crop.image);
    const ForwardResult out = forward(weights, batch, false);
    const auto t2 = clock::now();
    const FingerProbabilities probs = probabilities_from_output(out.probabilities, 0);
    std::array<double, kEnsembleSide> coords{};
    if (weights.config.average_in_network && out.averaged.size() > 0) {
      for (int c = 0; c < kEnsembleSide; ++c) coords[c] = out.averaged[c];
    } else if (out.positions.rank() == 2) {
      for (int c = 0; c < kEnsembleSide; ++c) coords[c] = out.positions[c];
    } else {
      coords = ensemble_average(ensemble_from_output(out.positions, 0));
    }
    DetectionResult result = assemble_result(probs, coords, crop.box, Threshold{}, registry);
    (void)result;
    const auto t3 = clock::now();

    if (i < warmup) continue;
    det_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    fwd_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
    post_us.push_back(std::chrono::duration<double, std::micro>(t3 - t2).count());
  }

  auto mean_std = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= xs.empty() ? 1.0 : static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= xs.empty() ? 1.0 : static_cast<double>(xs.size());
    return std::pair<double, double>{mean, std::sqrt(var)};
  };

  TimingReport report;
  report.parameters = weights.parameter_count();
  report.images = static_cast<int>(det_ms.size());
  report.warmup = warmup;
  std::tie(report.detector_ms_mean, report.detector_ms_std) = mean_std(det_ms);
  std::tie(report.forward_ms_mean, report.forward_ms_std) = mean_std(fwd_ms);
  std::tie(report.post_us_mean, report.post_us_std) = mean_std(post_us);
  report.total_ms_mean =
      report.detector_ms_mean + report.forward_ms_mean + report.post_us_mean / 1000.0;
  return report;
}

namespace {

std::string pad(const std::string& s, size_t width) {
  if (s.size() >= width) return s;
  return s + std::string(width - s.size(), ' ');
}

std::string fmt(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string render_classification_table(const ClassMetrics& metrics) {
  std::ostringstream out;
  size_t name_w = 7;
  for (const auto& c : metrics.per_class) name_w = std::max(name_w, c.name.size());
  out << pad("Class", name_w) << "  Accuracy(%)  Precision(%)  Recall(%)  F1\n";
  for (const auto& c : metrics.per_class) {
    out << pad(c.name, name_w) << "  " << pad(fmt(c.accuracy * 100.0, 2), 11) << "  "
        << pad(fmt(c.precision * 100.0, 2), 12) << "  " << pad(fmt(c.recall * 100.0, 2), 9)
        << "  " << fmt(c.f1, 4);
    if (c.degenerate) out << "  (degenerate ratio reported as 0)";
    out << "\n";
  }
  out << pad("Mean", name_w) << "  " << pad(fmt(metrics.mean_accuracy * 100.0, 2), 11) << "  "
      << pad(fmt(metrics.mean_precision * 100.0, 2), 12) << "  "
      << pad(fmt(metrics.mean_recall * 100.0, 2), 9) << "  " << fmt(metrics.mean_f1, 4) << "\n";
  return out.str();
}

std::string render_pixel_error_table(const PixelErrorReport& report) {
  std::ostringstream out;
  size_t name_w = 7;
  for (const auto& c : report.per_class) name_w = std::max(name_w, c.name.size());
  out << pad("Class", name_w) << "  Error(px)\n";
  for (const auto& c : report.per_class) {
    out << pad(c.name, name_w) << "  ";
    if (c.present)
      out << fmt(c.mean, 2) << " +- " << fmt(c.stddev, 2) << "  (" << c.fingers << " fingertips, "
          << c.samples << " samples)";
    else
      out << "no correctly recognized samples";
    out << "\n";
  }
  out << pad("Mean", name_w) << "  " << fmt(report.overall_mean, 2) << " +- "
      << fmt(report.overall_stddev, 2) << "\n";
  return out.str();
}

std::string render_confusion_table(const ConfusionMatrix& matrix) {
  std::ostringstream out;
  size_t name_w = 7;
  for (const auto& name : matrix.classes) name_w = std::max(name_w, name.size());
  out << pad("actual\\pred", name_w);
  for (const auto& name : matrix.classes) out << "  " << pad(name, std::max<size_t>(name.size(), 5));
  out << "  unknown\n";
  for (size_t r = 0; r < matrix.classes.size(); ++r) {
    out << pad(matrix.classes[r], name_w);
    for (size_t c = 0; c < matrix.counts[r].size(); ++c) {
      const size_t w = c < matrix.classes.size()
                           ? std::max<size_t>(matrix.classes[c].size(), 5)
                           : 7;
      out << "  " << pad(std::to_string(matrix.counts[r][c]), w);
    }
    out << "\n";
  }
  return out.str();
}

std::string render_timing_table(const TimingReport& report) {
  std::ostringstream out;
  out << "Total parameters    " << report.parameters << "\n";
  out << "Timed images        " << report.images << " (warm-up " << report.warmup << ")\n";
  out << "Detector (ms)       " << fmt(report.detector_ms_mean, 3) << " +- "
      << fmt(report.detector_ms_std, 3) << "\n";
  out << "Forward pass (ms)   " << fmt(report.forward_ms_mean, 3) << " +- "
      << fmt(report.forward_ms_std, 3) << "\n";
  out << "Post-processing (us) " << fmt(report.post_us_mean, 2) << " +- "
      << fmt(report.post_us_std, 2) << "\n";
  out << "Total (ms)          " << fmt(report.total_ms_mean, 3) << "\n";
  return out.str();
}

}  // namespace unigest

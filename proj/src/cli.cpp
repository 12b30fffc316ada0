#include "unigest/cli.hpp"

#include <climits>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <CLI11.hpp>
#include <json.hpp>

#include "unigest/dataio.hpp"
#include "unigest/errors.hpp"
#include "unigest/evaluation.hpp"
#include "unigest/model.hpp"
#include "unigest/pipeline.hpp"
#include "unigest/plot.hpp"
#include "unigest/training.hpp"

namespace unigest {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Config precedence: defaults < config file < flags. Options bound through
// a Binder pick up config-file values when their flag was not given.
class Binder {
 public:
  template <typename T>
  CLI::Option* option(CLI::App* cmd, const std::string& flag, T& value, const std::string& desc) {
    CLI::Option* opt = cmd->add_option(flag, value, desc)->capture_default_str();
    const std::string key = config_key(flag);
    appliers_.push_back([opt, key, &value](const json& file) {
      if (opt->count() > 0 || !file.contains(key)) return;
      try {
        value = file.at(key).get<T>();
      } catch (const json::exception& e) {
        throw DataError("config key '" + key + "': " + e.what());
      }
    });
    return opt;
  }

  CLI::Option* flag(CLI::App* cmd, const std::string& name, bool& value,
                    const std::string& desc) {
    CLI::Option* opt = cmd->add_flag(name, value, desc);
    const std::string key = config_key(name);
    appliers_.push_back([opt, key, &value](const json& file) {
      if (opt->count() > 0 || !file.contains(key)) return;
      try {
        value = file.at(key).get<bool>();
      } catch (const json::exception& e) {
        throw DataError("config key '" + key + "': " + e.what());
      }
    });
    return opt;
  }

  void apply(const std::string& config_path) const {
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) throw DataError("cannot open config file: " + config_path);
    json file;
    try {
      in >> file;
    } catch (const json::parse_error& e) {
      throw DataError(config_path + ": invalid JSON: " + e.what());
    }
    if (!file.is_object()) throw DataError(config_path + ": config must be a JSON object");
    for (const auto& apply_one : appliers_) apply_one(file);
  }

 private:
  static std::string config_key(const std::string& flag) {
    std::string key = flag.substr(flag.find_first_not_of('-'));
    for (char& c : key)
      if (c == '-') c = '_';
    return key;
  }

  std::vector<std::function<void(const json&)>> appliers_;
};

struct CommonOpts {
  uint64_t seed = 0;
  std::string config_path;
  std::string out;

  void attach(CLI::App* cmd, Binder& binder, bool out_required) {
    binder.option(cmd, "--seed", seed, "Random seed")->envname("UNIGEST_SEED");
    cmd->add_option("--config", config_path,
                    "JSON config file; flags override file values, file overrides defaults")
        ->envname("UNIGEST_CONFIG");
    CLI::Option* out_opt =
        binder.option(cmd, "--out", out, "Output path")->envname("UNIGEST_OUT");
    if (out_required) out_opt->required();
  }
};

NetworkConfig network_config_from_name(const std::string& name) {
  if (name == "full") return NetworkConfig::vgg16();
  if (name == "shrunken") return NetworkConfig::shrunken();
  if (name == "compact") return NetworkConfig::compact();
  throw ConfigError("unknown network '" + name + "' (expected full, shrunken or compact)");
}

std::vector<LrStep> parse_lr_schedule(const std::string& text) {
  std::vector<LrStep> schedule;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const size_t colon = part.find(':');
    if (colon == std::string::npos)
      throw ConfigError("bad --lr-schedule entry '" + part + "', expected EPOCH:RATE");
    LrStep step;
    try {
      step.until_epoch = std::stoi(part.substr(0, colon));
      step.lr = std::stod(part.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad --lr-schedule entry '" + part + "'");
    }
    if (step.lr <= 0.0) throw ConfigError("learning rates must be positive");
    schedule.push_back(step);
  }
  if (schedule.empty()) throw ConfigError("--lr-schedule is empty");
  for (size_t i = 1; i < schedule.size(); ++i) {
    if (schedule[i].until_epoch <= schedule[i - 1].until_epoch)
      throw ConfigError("--lr-schedule epochs must increase");
    if (schedule[i].lr > schedule[i - 1].lr)
      throw ConfigError("--lr-schedule rates must be non-increasing");
  }
  return schedule;
}

Threshold parse_tau(double tau) {
  if (tau <= 0.0 || tau >= 1.0) throw ConfigError("--tau must lie strictly between 0 and 1");
  return Threshold{tau};
}

std::map<std::string, std::vector<std::string>> files_per_class(
    const std::vector<AnnotationRecord>& records) {
  std::map<std::string, std::vector<std::string>> per_class;
  for (const AnnotationRecord& r : records) per_class[r.gesture_class].push_back(r.image);
  return per_class;
}

std::vector<size_t> indices_for_set(const Dataset& ds,
                                    const std::map<std::string, ClassSplit>& splits,
                                    const std::string& set_name) {
  std::unordered_set<std::string> wanted;
  for (const auto& [cls, s] : splits) {
    const std::vector<std::string>* list = nullptr;
    if (set_name == "test")
      list = &s.test;
    else if (set_name == "val")
      list = &s.val;
    else if (set_name == "train")
      list = &s.train;
    else
      throw ConfigError("unknown split set '" + set_name + "'");
    for (const std::string& f : *list) wanted.insert(f);
  }
  std::vector<size_t> indices;
  for (size_t i = 0; i < ds.records.size(); ++i)
    if (wanted.count(ds.records[i].image) > 0) indices.push_back(i);
  return indices;
}

TrainData subset_data(const Dataset& ds, std::vector<size_t> indices) {
  TrainData data;
  data.count = indices.size();
  data.get = [&ds, indices = std::move(indices)](size_t i) {
    return ds.materialize(indices[i]);
  };
  return data;
}

json metrics_to_json(const ClassMetrics& metrics) {
  json per_class = json::array();
  for (const auto& c : metrics.per_class) {
    per_class.push_back({{"name", c.name},
                         {"tp", c.tp},
                         {"fp", c.fp},
                         {"fn", c.fn},
                         {"tn", c.tn},
                         {"accuracy", c.accuracy},
                         {"precision", c.precision},
                         {"recall", c.recall},
                         {"f1", c.f1},
                         {"degenerate", c.degenerate}});
  }
  return {{"per_class", per_class},
          {"mean",
           {{"accuracy", metrics.mean_accuracy},
            {"precision", metrics.mean_precision},
            {"recall", metrics.mean_recall},
            {"f1", metrics.mean_f1}}},
          {"total", metrics.total}};
}

json pixel_report_to_json(const PixelErrorReport& report) {
  json per_class = json::array();
  for (const auto& c : report.per_class) {
    per_class.push_back({{"name", c.name},
                         {"present", c.present},
                         {"mean", c.mean},
                         {"stddev", c.stddev},
                         {"fingers", c.fingers},
                         {"samples", c.samples}});
  }
  return {{"per_class", per_class},
          {"overall_mean", report.overall_mean},
          {"overall_stddev", report.overall_stddev},
          {"evaluated_samples", report.evaluated_samples},
          {"excluded_samples", report.excluded_samples}};
}

json confusion_to_json(const ConfusionMatrix& matrix) {
  return {{"classes", matrix.classes}, {"counts", matrix.counts}};
}

ConfusionMatrix confusion_from_json(const json& j) {
  ConfusionMatrix m;
  m.classes = j.at("classes").get<std::vector<std::string>>();
  m.counts = j.at("counts").get<std::vector<std::vector<int64_t>>>();
  return m;
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
  CommonOpts common;
  int count = 64;
  int canvas_w = 640;
  int canvas_h = 480;
  int min_box = 200;
  int max_box = 320;
  double marker_radius = 14.0;
  std::string registry_path;
  bool no_stratify = false;
};

int cmd_synth(const SynthOpts& opts) {
  SyntheticConfig cfg;
  cfg.canvas_width = opts.canvas_w;
  cfg.canvas_height = opts.canvas_h;
  cfg.min_box = opts.min_box;
  cfg.max_box = opts.max_box;
  cfg.marker_radius = opts.marker_radius;
  cfg.stratified = !opts.no_stratify;
  cfg.seed = opts.common.seed;
  if (!opts.registry_path.empty())
    cfg.registry = GestureRegistry::from_json_file(opts.registry_path);

  const std::vector<AnnotatedSample> samples = generate_synthetic(cfg, opts.count);
  write_dataset(samples, opts.common.out, cfg.registry);
  std::cout << "wrote " << samples.size() << " synthetic samples to " << opts.common.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- split

struct SplitOpts {
  CommonOpts common;
  std::string root;
  int test_stride = 10;
  int val_stride = 20;
  std::string mode = "block-random";
};

int cmd_split(const SplitOpts& opts) {
  SplitSpec spec;
  spec.test_stride = opts.test_stride;
  spec.val_stride = opts.val_stride;
  if (opts.mode == "block-random")
    spec.mode = SplitSpec::Mode::block_random;
  else if (opts.mode == "fixed-stride")
    spec.mode = SplitSpec::Mode::fixed_stride;
  else
    throw ConfigError("--mode must be block-random or fixed-stride");

  const auto records = read_annotations(fs::path(opts.root) / "annotations.jsonl");
  const auto per_class = files_per_class(records);
  if (per_class.empty()) throw DataError("no annotation records under " + opts.root);
  const auto splits = split(per_class, spec, opts.common.seed);

  const fs::path out = opts.common.out.empty() ? fs::path(opts.root) / "splits.json"
                                               : fs::path(opts.common.out);
  write_splits_json(splits, spec, opts.common.seed, out);
  for (const auto& [name, s] : splits)
    std::cout << name << ": test " << s.test.size() << ", val " << s.val.size() << ", train "
              << s.train.size() << "\n";
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- import

struct ImportOpts {
  CommonOpts common;
  std::string src;
  std::string registry_path;
};

int cmd_import(const ImportOpts& opts) {
  const GestureRegistry registry = opts.registry_path.empty()
                                       ? GestureRegistry::default_registry()
                                       : GestureRegistry::from_json_file(opts.registry_path);
  const int n = import_corpus(opts.src, opts.common.out, registry);
  std::cout << "imported " << n << " samples into " << opts.common.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainOpts {
  CommonOpts common;
  std::string root;
  std::string splits_path;
  std::string net = "compact";
  int epochs = 300;
  int batch_size = 64;
  double lr = 0.0;  // 0 = use schedule
  std::string lr_schedule;
  double dropout = -1.0;
  bool no_augment = false;
  bool bias_correction = false;
  int max_steps = 0;
  int checkpoint_interval = 0;
  bool verbose = false;
};

int cmd_train(const TrainOpts& opts) {
  const Dataset ds = load_dataset(opts.root);

  std::vector<size_t> train_idx, val_idx;
  fs::path splits_path =
      opts.splits_path.empty() ? fs::path(opts.root) / "splits.json" : fs::path(opts.splits_path);
  if (fs::exists(splits_path)) {
    const auto splits = read_splits_json(splits_path);
    train_idx = indices_for_set(ds, splits, "train");
    val_idx = indices_for_set(ds, splits, "val");
  } else {
    // No split file: train on everything, no validation.
    train_idx.resize(ds.records.size());
    for (size_t i = 0; i < train_idx.size(); ++i) train_idx[i] = i;
  }
  if (train_idx.empty()) throw DataError("training split is empty");

  NetworkConfig nc = network_config_from_name(opts.net);
  if (opts.dropout >= 0.0) nc.dropout_rate = opts.dropout;

  TrainConfig tc;
  tc.batch_size = opts.batch_size;
  tc.epochs = opts.epochs;
  tc.seed = opts.common.seed;
  tc.adam.bias_correction = opts.bias_correction;
  tc.augmentation.enabled = !opts.no_augment;
  tc.max_steps = opts.max_steps;
  tc.checkpoint_interval = opts.checkpoint_interval;
  tc.verbose = opts.verbose;
  if (opts.lr > 0.0)
    tc.lr_schedule = {{INT_MAX, opts.lr}};
  else if (!opts.lr_schedule.empty())
    tc.lr_schedule = parse_lr_schedule(opts.lr_schedule);

  const fs::path out_dir(opts.common.out);
  fs::create_directories(out_dir);
  if (tc.checkpoint_interval > 0) {
    tc.checkpoint_dir = out_dir / "checkpoints";
    fs::create_directories(tc.checkpoint_dir);
  }

  const TrainData train_data = subset_data(ds, train_idx);
  const TrainData val_data = subset_data(ds, val_idx);
  const TrainResult result = train(train_data, val_data, tc, nc);

  save_checkpoint(result.weights, out_dir / "weights.ckpt");
  write_history_csv(result.history, out_dir / "history.csv");
  if (result.diverged_at_step.has_value()) {
    std::cerr << "training diverged at step " << *result.diverged_at_step
              << "; wrote last good weights\n";
    return 3;
  }
  if (!result.history.empty()) {
    const HistoryRow& last = result.history.back();
    std::cout << "final train loss " << last.train.total << ", val loss " << last.val.total
              << "\n";
  }
  std::cout << "wrote " << (out_dir / "weights.ckpt").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
  CommonOpts common;
  std::string root;
  std::string weights_path;
  std::string set_name = "test";
  std::string splits_path;
  std::string boxes_path;
  double tau = 0.5;
};

struct EvalOutcome {
  ClassMetrics metrics;
  PixelErrorReport pixels;
  ConfusionMatrix confusion;
};

EvalOutcome evaluate_samples(const Dataset& ds, const std::vector<size_t>& indices,
                             const NetworkWeights& weights, HandDetector& detector, Threshold tau,
                             const PostProcess& post, std::vector<std::string>* pred_lines) {
  std::vector<std::pair<std::string, std::string>> true_pred;
  std::vector<LabeledDetection> labeled;
  for (size_t idx : indices) {
    const AnnotatedSample sample = ds.materialize(idx);
    const auto result =
        detect(sample.image, sample.image_name, detector, weights, ds.registry, tau, post);
    if (result.has_value()) {
      true_pred.emplace_back(sample.gesture_class, result->gesture_class);
      LabeledDetection ld;
      ld.true_class = sample.gesture_class;
      ld.true_code = sample.code;
      ld.truth = sample.fingertips;
      ld.result = *result;
      labeled.push_back(std::move(ld));
      if (pred_lines != nullptr)
        pred_lines->push_back(detection_to_json_line(*result, sample.image_name));
    } else {
      // No hand found counts as a misrecognition everywhere.
      true_pred.emplace_back(sample.gesture_class, kUnknownClass);
      if (pred_lines != nullptr)
        pred_lines->push_back(
            json({{"image", sample.image_name}, {"detection", nullptr}}).dump());
    }
  }
  EvalOutcome outcome;
  const std::vector<std::string> classes = ds.registry.class_names();
  outcome.metrics = classification_metrics(true_pred, classes);
  outcome.pixels = pixel_error(labeled, classes);
  outcome.confusion = confusion_matrix(true_pred, classes);
  return outcome;
}

int cmd_eval(const EvalOpts& opts) {
  const Dataset ds = load_dataset(opts.root);
  const NetworkWeights weights = load_checkpoint(opts.weights_path);
  const Threshold tau = parse_tau(opts.tau);

  std::vector<size_t> indices;
  if (opts.set_name == "all") {
    indices.resize(ds.records.size());
    for (size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  } else {
    const fs::path splits_path = opts.splits_path.empty() ? fs::path(opts.root) / "splits.json"
                                                          : fs::path(opts.splits_path);
    indices = indices_for_set(ds, read_splits_json(splits_path), opts.set_name);
  }
  if (indices.empty()) throw DataError("no samples in set '" + opts.set_name + "'");

  GroundTruthDetector gt;
  FileBoxDetector boxes;
  HandDetector* detector = nullptr;
  if (opts.boxes_path.empty()) {
    for (const auto& r : ds.records) gt.add(r.image, r.bbox);
    detector = &gt;
  } else {
    boxes = FileBoxDetector::from_jsonl(opts.boxes_path);
    detector = &boxes;
  }

  std::vector<std::string> pred_lines;
  const EvalOutcome outcome =
      evaluate_samples(ds, indices, weights, *detector, tau, PostProcess{}, &pred_lines);

  const fs::path out_dir(opts.common.out);
  fs::create_directories(out_dir);
  json report;
  report["set"] = opts.set_name;
  report["detector"] = opts.boxes_path.empty() ? "ground-truth" : "boxes-file";
  report["tau"] = tau.value;
  report["classification"] = metrics_to_json(outcome.metrics);
  report["pixel_error"] = pixel_report_to_json(outcome.pixels);
  report["confusion"] = confusion_to_json(outcome.confusion);
  {
    std::ofstream out(out_dir / "report.json");
    out << report.dump(2) << "\n";
  }
  {
    std::ofstream out(out_dir / "tables.txt");
    out << render_classification_table(outcome.metrics) << "\n"
        << render_pixel_error_table(outcome.pixels) << "\n"
        << render_confusion_table(outcome.confusion);
  }
  {
    std::ofstream out(out_dir / "predictions.jsonl");
    for (const std::string& line : pred_lines) out << line << "\n";
  }
  std::cout << render_classification_table(outcome.metrics) << "\n"
            << render_pixel_error_table(outcome.pixels);
  std::cout << "wrote " << (out_dir / "report.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- predict

struct PredictOpts {
  CommonOpts common;
  std::string weights_path;
  std::string images_dir;
  std::string boxes_path;
  std::string registry_path;
  double tau = 0.5;
};

int cmd_predict(const PredictOpts& opts) {
  const NetworkWeights weights = load_checkpoint(opts.weights_path);
  const Threshold tau = parse_tau(opts.tau);
  FileBoxDetector detector = FileBoxDetector::from_jsonl(opts.boxes_path);
  const GestureRegistry registry = opts.registry_path.empty()
                                       ? GestureRegistry::default_registry()
                                       : GestureRegistry::from_json_file(opts.registry_path);

  std::vector<fs::path> image_files;
  for (const auto& entry : fs::directory_iterator(opts.images_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ppm")
      image_files.push_back(entry.path());
  std::sort(image_files.begin(), image_files.end());
  if (image_files.empty()) throw DataError("no .ppm images under " + opts.images_dir);

  std::ofstream out(opts.common.out);
  if (!out) throw DataError("cannot write " + opts.common.out);
  int detections = 0;
  for (const fs::path& file : image_files) {
    const Image image = read_ppm(file);
    const std::string id = file.filename().string();
    const auto result = detect(image, id, detector, weights, registry, tau);
    if (result.has_value()) {
      out << detection_to_json_line(*result, id) << "\n";
      ++detections;
    } else {
      out << json({{"image", id}, {"detection", nullptr}}).dump() << "\n";
    }
  }
  std::cout << "predicted " << detections << "/" << image_files.size() << " images into "
            << opts.common.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- ablate

struct AblateOpts {
  CommonOpts common;
  std::string root;
  std::string variants = "all";
  std::string net = "compact";
  int epochs = 40;
  int batch_size = 16;
  double lr = 1e-3;
  int max_steps = 0;
  bool augment = false;
  double tau = 0.5;
};

int cmd_ablate(const AblateOpts& opts) {
  const Dataset ds = load_dataset(opts.root);
  const Threshold tau = parse_tau(opts.tau);

  std::vector<size_t> train_idx, eval_idx;
  const fs::path splits_path = fs::path(opts.root) / "splits.json";
  if (fs::exists(splits_path)) {
    const auto splits = read_splits_json(splits_path);
    train_idx = indices_for_set(ds, splits, "train");
    eval_idx = indices_for_set(ds, splits, "test");
  } else {
    train_idx.resize(ds.records.size());
    for (size_t i = 0; i < train_idx.size(); ++i) train_idx[i] = i;
    eval_idx = train_idx;
  }

  std::vector<AblationVariant> variants;
  if (opts.variants == "all") {
    variants = {AblationVariant::proposed, AblationVariant::averaging_layer,
                AblationVariant::random_ensemble_sample, AblationVariant::direct_fc_regression};
  } else {
    std::stringstream ss(opts.variants);
    std::string name;
    while (std::getline(ss, name, ',')) variants.push_back(variant_from_name(name));
  }

  GroundTruthDetector gt;
  for (const auto& r : ds.records) gt.add(r.image, r.bbox);

  const fs::path out_dir(opts.common.out);
  fs::create_directories(out_dir);
  json report = json::array();
  std::cout << "variant            accuracy   pixel error (px)\n";

  for (AblationVariant variant : variants) {
    const VariantSetup setup =
        build_variant(variant, network_config_from_name(opts.net), opts.common.seed);
    TrainConfig tc;
    tc.batch_size = opts.batch_size;
    tc.epochs = opts.epochs;
    tc.seed = opts.common.seed;
    tc.augmentation.enabled = opts.augment;
    tc.max_steps = opts.max_steps;
    tc.lr_schedule = {{INT_MAX, opts.lr}};

    const TrainData train_data = subset_data(ds, train_idx);
    const TrainData val_data = subset_data(ds, {});
    const TrainResult trained = train(train_data, val_data, tc, setup.weights.config);

    const EvalOutcome outcome =
        evaluate_samples(ds, eval_idx, trained.weights, gt, tau, setup.post, nullptr);
    std::printf("%-18s %8.2f%%   %.2f +- %.2f\n", variant_name(variant),
                outcome.metrics.mean_accuracy * 100.0, outcome.pixels.overall_mean,
                outcome.pixels.overall_stddev);
    report.push_back({{"variant", variant_name(variant)},
                      {"mean_accuracy", outcome.metrics.mean_accuracy},
                      {"pixel_error_mean", outcome.pixels.overall_mean},
                      {"pixel_error_stddev", outcome.pixels.overall_stddev}});
    save_checkpoint(trained.weights, out_dir / (std::string(variant_name(variant)) + ".ckpt"));
  }
  std::ofstream out(out_dir / "ablation.json");
  out << report.dump(2) << "\n";
  std::cout << "wrote " << (out_dir / "ablation.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchOpts {
  CommonOpts common;
  std::string net = "compact";
  std::string weights_path;
  int images = 30;
  int warmup = 10;
};

int cmd_bench(const BenchOpts& opts) {
  NetworkWeights weights = opts.weights_path.empty()
                               ? build(network_config_from_name(opts.net), opts.common.seed)
                               : load_checkpoint(opts.weights_path);

  SyntheticConfig synth_cfg;
  synth_cfg.seed = opts.common.seed;
  const int unique_images = std::min(opts.images, 16);
  const std::vector<AnnotatedSample> samples = generate_synthetic(synth_cfg, unique_images);

  GroundTruthDetector detector;
  std::vector<const Image*> images;
  std::vector<std::string> ids;
  for (const AnnotatedSample& s : samples) {
    detector.add(s.image_name, s.bbox);
    images.push_back(&s.image);
    ids.push_back(s.image_name);
  }

  const TimingReport report = benchmark(weights, detector, images, ids, opts.images, opts.warmup);
  const std::string table = render_timing_table(report);
  std::cout << table;
  if (!opts.common.out.empty()) {
    std::ofstream out(opts.common.out);
    out << table;
    std::cout << "wrote " << opts.common.out << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- plot

struct PlotOpts {
  CommonOpts common;
  std::string history_path;
  std::string report_path;
};

int cmd_plot(const PlotOpts& opts) {
  if (opts.history_path.empty() && opts.report_path.empty())
    throw ConfigError("plot needs --history and/or --report");
  const fs::path out_dir(opts.common.out);
  fs::create_directories(out_dir);
  if (!opts.history_path.empty()) {
    const History history = read_history_csv(opts.history_path);
    render_learning_curves(history, out_dir);
    std::cout << "wrote learning curves under " << out_dir.string() << "\n";
  }
  if (!opts.report_path.empty()) {
    std::ifstream in(opts.report_path);
    if (!in) throw DataError("cannot open report: " + opts.report_path);
    json j;
    try {
      in >> j;
    } catch (const json::parse_error& e) {
      throw DataError(opts.report_path + ": invalid JSON: " + e.what());
    }
    ConfusionMatrix matrix;
    try {
      matrix = confusion_from_json(j.at("confusion"));
    } catch (const json::exception& e) {
      throw DataError(opts.report_path + ": no confusion section: " + e.what());
    }
    write_ppm(render_confusion_image(matrix), out_dir / "confusion.ppm");
    std::cout << "wrote " << (out_dir / "confusion.ppm").string() << "\n";
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{
      "Unified egocentric hand gesture recognition and fingertip detection.\n"
      "Environment overrides: UNIGEST_SEED, UNIGEST_CONFIG, UNIGEST_OUT."};
  app.require_subcommand(1);

  SynthOpts synth;
  Binder synth_binder;
  {
    CLI::App* cmd = app.add_subcommand("synth", "Generate a synthetic labeled dataset");
    synth_binder.option(cmd, "--count", synth.count, "Number of samples");
    synth_binder.option(cmd, "--canvas-w", synth.canvas_w, "Canvas width");
    synth_binder.option(cmd, "--canvas-h", synth.canvas_h, "Canvas height");
    synth_binder.option(cmd, "--min-box", synth.min_box, "Minimum hand box size");
    synth_binder.option(cmd, "--max-box", synth.max_box, "Maximum hand box size");
    synth_binder.option(cmd, "--marker-radius", synth.marker_radius, "Fingertip marker radius");
    synth_binder.option(cmd, "--registry", synth.registry_path,
                        "Registry JSON (default: built-in)");
    synth_binder.flag(cmd, "--no-stratify", synth.no_stratify, "Sample classes randomly");
    synth.common.attach(cmd, synth_binder, /*out_required=*/true);
  }

  SplitOpts split_opts;
  Binder split_binder;
  {
    CLI::App* cmd = app.add_subcommand("split", "Emit test/val/train splits for a dataset");
    split_binder.option(cmd, "--root", split_opts.root, "Dataset root")->required();
    split_binder.option(cmd, "--test-stride", split_opts.test_stride,
                        "One test pick per this many files");
    split_binder.option(cmd, "--val-stride", split_opts.val_stride,
                        "One validation pick per this many remaining files");
    split_binder.option(cmd, "--mode", split_opts.mode, "block-random or fixed-stride");
    split_opts.common.attach(cmd, split_binder, /*out_required=*/false);
  }

  ImportOpts import_opts;
  Binder import_binder;
  {
    CLI::App* cmd =
        app.add_subcommand("import", "Convert an external corpus to the dataset layout");
    import_binder.option(cmd, "--src", import_opts.src,
                         "Corpus root (per-class dirs with label.txt)")
        ->required();
    import_binder.option(cmd, "--registry", import_opts.registry_path,
                         "Registry JSON (default: built-in)");
    import_opts.common.attach(cmd, import_binder, /*out_required=*/true);
  }

  TrainOpts train_opts;
  Binder train_binder;
  {
    CLI::App* cmd = app.add_subcommand("train", "Train the dual-head network");
    train_binder.option(cmd, "--root", train_opts.root, "Dataset root")->required();
    train_binder.option(cmd, "--splits", train_opts.splits_path,
                        "splits.json (default: root/splits.json)");
    train_binder.option(cmd, "--net", train_opts.net, "full, shrunken or compact");
    train_binder.option(cmd, "--epochs", train_opts.epochs, "Training epochs");
    train_binder.option(cmd, "--batch-size", train_opts.batch_size, "Batch size");
    train_binder.option(cmd, "--lr", train_opts.lr, "Constant learning rate (overrides schedule)");
    train_binder.option(cmd, "--lr-schedule", train_opts.lr_schedule,
                        "Stepwise schedule EPOCH:RATE[,EPOCH:RATE...]");
    train_binder.option(cmd, "--dropout", train_opts.dropout, "Dropout rate override");
    train_binder.flag(cmd, "--no-augment", train_opts.no_augment, "Disable data augmentation");
    train_binder.flag(cmd, "--bias-correction", train_opts.bias_correction,
                      "Use bias-corrected ADAM moments");
    train_binder.option(cmd, "--max-steps", train_opts.max_steps,
                        "Stop after this many optimizer steps");
    train_binder.option(cmd, "--checkpoint-interval", train_opts.checkpoint_interval,
                        "Checkpoint every N epochs");
    train_binder.flag(cmd, "--verbose", train_opts.verbose, "Per-epoch progress on stderr");
    train_opts.common.attach(cmd, train_binder, /*out_required=*/true);
  }

  EvalOpts eval_opts;
  Binder eval_binder;
  {
    CLI::App* cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    eval_binder.option(cmd, "--root", eval_opts.root, "Dataset root")->required();
    eval_binder.option(cmd, "--weights", eval_opts.weights_path, "Weights checkpoint")->required();
    eval_binder.option(cmd, "--set", eval_opts.set_name, "test, val, train or all");
    eval_binder.option(cmd, "--splits", eval_opts.splits_path,
                       "splits.json (default: root/splits.json)");
    eval_binder.option(cmd, "--boxes", eval_opts.boxes_path,
                       "Precomputed detector boxes JSONL (default: ground-truth boxes)");
    eval_binder.option(cmd, "--tau", eval_opts.tau, "Visibility confidence threshold");
    eval_opts.common.attach(cmd, eval_binder, /*out_required=*/true);
  }

  PredictOpts predict_opts;
  Binder predict_binder;
  {
    CLI::App* cmd = app.add_subcommand("predict", "Run detection over a directory of images");
    predict_binder.option(cmd, "--weights", predict_opts.weights_path, "Weights checkpoint")
        ->required();
    predict_binder.option(cmd, "--images", predict_opts.images_dir, "Directory of .ppm images")
        ->required();
    predict_binder.option(cmd, "--boxes", predict_opts.boxes_path,
                          "Precomputed detector boxes JSONL")
        ->required();
    predict_binder.option(cmd, "--registry", predict_opts.registry_path,
                          "Registry JSON (default: built-in)");
    predict_binder.option(cmd, "--tau", predict_opts.tau, "Visibility confidence threshold");
    predict_opts.common.attach(cmd, predict_binder, /*out_required=*/true);
  }

  AblateOpts ablate_opts;
  Binder ablate_binder;
  {
    CLI::App* cmd = app.add_subcommand("ablate", "Train and compare regression-head variants");
    ablate_binder.option(cmd, "--root", ablate_opts.root, "Dataset root")->required();
    ablate_binder.option(
        cmd, "--variants", ablate_opts.variants,
        "all or comma list of proposed, averaging-layer, random-ensemble, direct-fc");
    ablate_binder.option(cmd, "--net", ablate_opts.net, "full, shrunken or compact");
    ablate_binder.option(cmd, "--epochs", ablate_opts.epochs, "Training epochs per variant");
    ablate_binder.option(cmd, "--batch-size", ablate_opts.batch_size, "Batch size");
    ablate_binder.option(cmd, "--lr", ablate_opts.lr, "Learning rate");
    ablate_binder.option(cmd, "--max-steps", ablate_opts.max_steps, "Step cap per variant");
    ablate_binder.flag(cmd, "--augment", ablate_opts.augment, "Enable augmentation");
    ablate_binder.option(cmd, "--tau", ablate_opts.tau, "Visibility confidence threshold");
    ablate_opts.common.attach(cmd, ablate_binder, /*out_required=*/true);
  }

  BenchOpts bench_opts;
  Binder bench_binder;
  {
    CLI::App* cmd = app.add_subcommand("bench", "Time the detection pipeline stage by stage");
    bench_binder.option(cmd, "--net", bench_opts.net, "full, shrunken or compact");
    bench_binder.option(cmd, "--weights", bench_opts.weights_path,
                        "Checkpoint (default: seeded init)");
    bench_binder.option(cmd, "--images", bench_opts.images, "Timed detections");
    bench_binder.option(cmd, "--warmup", bench_opts.warmup,
                        "Warm-up detections excluded from stats");
    bench_opts.common.attach(cmd, bench_binder, /*out_required=*/false);
  }

  PlotOpts plot_opts;
  Binder plot_binder;
  {
    CLI::App* cmd = app.add_subcommand("plot", "Render learning curves and confusion matrices");
    plot_binder.option(cmd, "--history", plot_opts.history_path, "history.csv from train");
    plot_binder.option(cmd, "--report", plot_opts.report_path, "report.json from eval");
    plot_opts.common.attach(cmd, plot_binder, /*out_required=*/true);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand("synth")) {
      synth_binder.apply(synth.common.config_path);
      return cmd_synth(synth);
    }
    if (app.got_subcommand("split")) {
      split_binder.apply(split_opts.common.config_path);
      return cmd_split(split_opts);
    }
    if (app.got_subcommand("import")) {
      import_binder.apply(import_opts.common.config_path);
      return cmd_import(import_opts);
    }
    if (app.got_subcommand("train")) {
      train_binder.apply(train_opts.common.config_path);
      return cmd_train(train_opts);
    }
    if (app.got_subcommand("eval")) {
      eval_binder.apply(eval_opts.common.config_path);
      return cmd_eval(eval_opts);
    }
    if (app.got_subcommand("predict")) {
      predict_binder.apply(predict_opts.common.config_path);
      return cmd_predict(predict_opts);
    }
    if (app.got_subcommand("ablate")) {
      ablate_binder.apply(ablate_opts.common.config_path);
      return cmd_ablate(ablate_opts);
    }
    if (app.got_subcommand("bench")) {
      bench_binder.apply(bench_opts.common.config_path);
      return cmd_bench(bench_opts);
    }
    if (app.got_subcommand("plot")) {
      plot_binder.apply(plot_opts.common.config_path);
      return cmd_plot(plot_opts);
    }
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("unigest");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace unigest

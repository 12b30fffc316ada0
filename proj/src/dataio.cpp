#include "unigest/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "unigest/errors.hpp"
#include "unigest/model.hpp"

namespace unigest {

using nlohmann::json;

ClassSplit split_class(const std::vector<std::string>& files, const SplitSpec& spec, Rng& rng) {
  if (files.empty()) throw InputError("split: empty class file list");
  if (spec.test_stride < 2 || spec.val_stride < 2)
    throw InputError("split: strides must be at least 2");

  const int n = static_cast<int>(files.size());
  std::vector<bool> taken(files.size(), false);

  ClassSplit out;
  const int test_blocks = n / spec.test_stride;
  for (int b = 0; b < test_blocks; ++b) {
    const int offset =
        spec.mode == SplitSpec::Mode::block_random ? rng.uniform_int(spec.test_stride) : 0;
    const int pick = b * spec.test_stride + offset;
    out.test.push_back(files[static_cast<size_t>(pick)]);
    taken[static_cast<size_t>(pick)] = true;
  }

  std::vector<std::string> remainder;
  remainder.reserve(files.size() - out.test.size());
  for (size_t i = 0; i < files.size(); ++i)
    if (!taken[i]) remainder.push_back(files[i]);

  std::vector<bool> taken_val(remainder.size(), false);
  const int val_blocks = static_cast<int>(remainder.size()) / spec.val_stride;
  for (int b = 0; b < val_blocks; ++b) {
    const int offset =
        spec.mode == SplitSpec::Mode::block_random ? rng.uniform_int(spec.val_stride) : 0;
    const int pick = b * spec.val_stride + offset;
    out.val.push_back(remainder[static_cast<size_t>(pick)]);
    taken_val[static_cast<size_t>(pick)] = true;
  }
  for (size_t i = 0; i < remainder.size(); ++i)
    if (!taken_val[i]) out.train.push_back(remainder[i]);
  return out;
}

std::map<std::string, ClassSplit> split(
    const std::map<std::string, std::vector<std::string>>& files_per_class, const SplitSpec& spec,
    uint64_t seed) {
  std::map<std::string, ClassSplit> out;
  for (const auto& [name, files] : files_per_class) {
    Rng rng({seed, fnv1a64(name.data(), name.size())});
    out[name] = split_class(files, spec, rng);
  }
  return out;
}

void write_splits_json(const std::map<std::string, ClassSplit>& splits, const SplitSpec& spec,
                       uint64_t seed, const std::filesystem::path& path) {
  json j;
  j["spec"]["test_stride"] = spec.test_stride;
  j["spec"]["val_stride"] = spec.val_stride;
  j["spec"]["mode"] =
      spec.mode == SplitSpec::Mode::block_random ? "block-random" : "fixed-stride";
  j["spec"]["seed"] = seed;
  json classes = json::object();
  for (const auto& [name, s] : splits) {
    json c;
    c["test"] = s.test;
    c["val"] = s.val;
    c["train"] = s.train;
    classes[name] = c;
  }
  j["classes"] = classes;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write splits: " + path.string());
  out << j.dump(2) << "\n";
}

std::map<std::string, ClassSplit> read_splits_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open splits: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
  std::map<std::string, ClassSplit> out;
  try {
    for (const auto& [name, c] : j.at("classes").items()) {
      ClassSplit s;
      s.test = c.at("test").get<std::vector<std::string>>();
      s.val = c.at("val").get<std::vector<std::string>>();
      s.train = c.at("train").get<std::vector<std::string>>();
      out[name] = s;
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": bad splits file: " + e.what());
  }
  return out;
}

AnnotatedSample Dataset::materialize(size_t index) const {
  const AnnotationRecord& r = records.at(index);
  AnnotatedSample sample;
  sample.image = read_ppm(root / r.image);
  sample.image_name = r.image;
  sample.gesture_class = r.gesture_class;
  sample.bbox = r.bbox;
  sample.code = r.code;
  sample.fingertips = r.fingertips;
  return sample;
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotations: " + path.string());
  std::vector<AnnotationRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    records.push_back(
        record_from_json_line(line, path.string() + ":" + std::to_string(line_no) + ": "));
  }
  return records;
}

Dataset load_dataset(const std::filesystem::path& root) {
  Dataset ds;
  ds.root = root;
  ds.registry = GestureRegistry::from_json_file(root / "registry.json");

  const std::filesystem::path ann_path = root / "annotations.jsonl";
  std::ifstream in(ann_path);
  if (!in) throw DataError("cannot open annotations: " + ann_path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string context = ann_path.string() + ":" + std::to_string(line_no) + ": ";
    AnnotationRecord record = record_from_json_line(line, context);

    const auto registered = ds.registry.code_of(record.gesture_class);
    if (!registered) throw DataError(context + "class " + record.gesture_class + " not in registry");
    if (!(*registered == record.code))
      throw DataError(context + "visibility code " + record.code.to_string() +
                      " disagrees with registry code for " + record.gesture_class);

    const std::filesystem::path image_path = root / record.image;
    if (!std::filesystem::exists(image_path))
      throw DataError(context + "missing image " + record.image);
    const auto size = read_ppm_size(image_path);
    const auto violations = validate_record(record, size[0], size[1]);
    if (!violations.empty()) throw DataError(context + violations.front());
    ds.records.push_back(std::move(record));
  }
  return ds;
}

void write_dataset(const std::vector<AnnotatedSample>& samples, const std::filesystem::path& root,
                   const GestureRegistry& registry) {
  std::filesystem::create_directories(root / "images");
  std::ofstream ann(root / "annotations.jsonl", std::ios::trunc);
  if (!ann) throw DataError("cannot write annotations under " + root.string());
  for (const AnnotatedSample& sample : samples) {
    if (sample.image_name.empty()) throw InputError("sample has no image name");
    write_ppm(sample.image, root / sample.image_name);
    ann << record_to_json_line(record_of(sample)) << "\n";
  }
  registry.save_json(root / "registry.json");
}

namespace {

struct MarkerColor {
  uint8_t r, g, b;
};

// One saturated color per finger, thumb through pinky.
constexpr MarkerColor kMarkerColors[kNumFingers] = {
    {220, 40, 40}, {40, 200, 40}, {40, 80, 230}, {235, 210, 40}, {220, 60, 220}};

void draw_background(Image& img, Rng& rng) {
  const int base_r = 90 + rng.uniform_int(50);
  const int base_g = 90 + rng.uniform_int(50);
  const int base_b = 90 + rng.uniform_int(50);
  const int block = 16;
  for (int by = 0; by < img.height; by += block) {
    for (int bx = 0; bx < img.width; bx += block) {
      const int jitter = rng.uniform_int(31) - 15;
      const auto shade = [&](int base) {
        return static_cast<uint8_t>(std::clamp(base + jitter, 0, 255));
      };
      fill_rect(img, bx, by, std::min(bx + block, img.width), std::min(by + block, img.height),
                shade(base_r), shade(base_g), shade(base_b));
    }
  }
}

}  // namespace

std::vector<AnnotatedSample> generate_synthetic(const SyntheticConfig& config, int count) {
  if (count < 1) throw InputError("generate_synthetic: count must be at least 1");
  if (config.registry.empty()) throw InputError("generate_synthetic: empty registry");
  const double margin = config.marker_radius + 2.0;
  if (config.min_box < 4 * margin)
    throw InputError("generate_synthetic: boxes too small for the marker radius");

  std::vector<AnnotatedSample> samples;
  samples.reserve(static_cast<size_t>(count));
  const auto& classes = config.registry.entries();

  for (int i = 0; i < count; ++i) {
    Rng rng({config.seed, 0x73796eULL, static_cast<uint64_t>(i)});
    const size_t class_idx = config.stratified ? static_cast<size_t>(i) % classes.size()
                                               : static_cast<size_t>(rng.uniform_int(
                                                     static_cast<int>(classes.size())));
    const auto& [class_name, code] = classes[class_idx];

    AnnotatedSample sample;
    sample.gesture_class = class_name;
    sample.code = code;
    sample.image = Image(config.canvas_width, config.canvas_height);
    draw_background(sample.image, rng);

    const int max_w = std::min(config.max_box, config.canvas_width);
    const int max_h = std::min(config.max_box, config.canvas_height);
    const int box_w = config.min_box + rng.uniform_int(std::max(1, max_w - config.min_box + 1));
    const int box_h = config.min_box + rng.uniform_int(std::max(1, max_h - config.min_box + 1));
    const int x_tl = rng.uniform_int(config.canvas_width - box_w + 1);
    const int y_tl = rng.uniform_int(config.canvas_height - box_h + 1);
    sample.bbox = {x_tl, y_tl, x_tl + box_w, y_tl + box_h};

    const double palm_x = x_tl + box_w * 0.5;
    const double palm_y = y_tl + box_h * 0.72;
    const double palm_radius = std::min(box_w, box_h) * 0.18;

    // Fingertips live in the upper part of the box, separated enough that
    // markers never merge.
    std::vector<std::array<double, 2>> placed;
    sample.fingertips.frame = CoordinateFrame::image_pixels;
    for (int f = 0; f < kNumFingers; ++f) {
      if (code.bits[f] == 0) continue;
      std::array<double, 2> p{};
      bool ok = false;
      for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
        p[0] = rng.uniform(x_tl + margin, x_tl + box_w - margin);
        p[1] = rng.uniform(y_tl + margin, y_tl + box_h * 0.55);
        ok = true;
        for (const auto& q : placed) {
          const double dx = p[0] - q[0];
          const double dy = p[1] - q[1];
          if (dx * dx + dy * dy < std::pow(2.6 * config.marker_radius, 2)) {
            ok = false;
            break;
          }
        }
      }
      if (!ok) {
        // Dense fallback: spread along a horizontal line.
        p[0] = x_tl + margin + (box_w - 2 * margin) * (f + 0.5) / kNumFingers;
        p[1] = y_tl + margin + box_h * 0.2;
      }
      placed.push_back(p);
      sample.fingertips.coords[f] = p;
    }

    // Limb strokes first, then palm, then markers on top.
    for (int f = 0; f < kNumFingers; ++f) {
      if (!sample.fingertips.coords[f].has_value()) continue;
      const auto& p = *sample.fingertips.coords[f];
      draw_line(sample.image, palm_x, palm_y, p[0], p[1], config.marker_radius * 0.8, 205, 170,
                140);
    }
    fill_circle(sample.image, palm_x, palm_y, palm_radius, 210, 175, 145);
    for (int f = 0; f < kNumFingers; ++f) {
      if (!sample.fingertips.coords[f].has_value()) continue;
      const auto& p = *sample.fingertips.coords[f];
      const MarkerColor& c = kMarkerColors[f];
      fill_circle(sample.image, p[0], p[1], config.marker_radius, c.r, c.g, c.b);
    }

    char name[40];
    std::snprintf(name, sizeof(name), "images/img_%05d.ppm", i);
    sample.image_name = name;
    samples.push_back(std::move(sample));
  }
  return samples;
}

int import_corpus(const std::filesystem::path& src, const std::filesystem::path& dst,
                  const GestureRegistry& registry) {
  if (!std::filesystem::exists(src)) throw DataError("import source not found: " + src.string());
  std::filesystem::create_directories(dst / "images");
  std::ofstream ann(dst / "annotations.jsonl", std::ios::trunc);
  if (!ann) throw DataError("cannot write annotations under " + dst.string());

  int imported = 0;
  std::vector<std::filesystem::path> class_dirs;
  for (const auto& entry : std::filesystem::directory_iterator(src))
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  std::sort(class_dirs.begin(), class_dirs.end());

  for (const auto& dir : class_dirs) {
    const std::string class_name = dir.filename().string();
    if (!registry.code_of(class_name))
      throw DataError("import: class directory " + class_name + " not in registry");
    const std::filesystem::path labels = dir / "label.txt";
    std::ifstream in(labels);
    if (!in) throw DataError("import: missing " + labels.string());
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::string context = labels.string() + ":" + std::to_string(line_no) + ": ";
      std::stringstream ss(line);
      std::string image_file;
      BoundingBox box;
      ss >> image_file >> box.x_tl >> box.y_tl >> box.x_br >> box.y_br;
      GestureCode code;
      int bits[kNumFingers];
      for (int f = 0; f < kNumFingers; ++f) ss >> bits[f];
      double coords[2 * kNumFingers];
      for (int c = 0; c < 2 * kNumFingers; ++c) ss >> coords[c];
      if (ss.fail()) throw DataError(context + "malformed label row");

      AnnotationRecord record;
      record.gesture_class = class_name;
      record.bbox = box;
      for (int f = 0; f < kNumFingers; ++f) {
        if (bits[f] != 0 && bits[f] != 1) throw DataError(context + "visibility bits must be 0/1");
        record.code.bits[f] = static_cast<uint8_t>(bits[f]);
        if (bits[f] == 1)
          record.fingertips.coords[f] = std::array<double, 2>{coords[2 * f], coords[2 * f + 1]};
      }

      const std::filesystem::path src_image = dir / image_file;
      if (!std::filesystem::exists(src_image))
        throw DataError(context + "missing image " + src_image.string());
      record.image = "images/" + class_name + "_" + image_file;
      std::filesystem::copy_file(src_image, dst / record.image,
                                 std::filesystem::copy_options::overwrite_existing);
      const auto size = read_ppm_size(dst / record.image);
      const auto violations = validate_record(record, size[0], size[1]);
      if (!violations.empty()) throw DataError(context + violations.front());
      ann << record_to_json_line(record) << "\n";
      ++imported;
    }
  }
  registry.save_json(dst / "registry.json");
  return imported;
}

}  // namespace unigest

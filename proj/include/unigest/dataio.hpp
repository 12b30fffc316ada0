#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "unigest/core.hpp"
#include "unigest/gesture_codec.hpp"
#include "unigest/rng.hpp"

namespace unigest {

// Split protocol: one test image from every consecutive block of
// test_stride files, then one validation image per block of val_stride
// from the remainder; the rest is training data.
struct SplitSpec {
  int test_stride = 10;
  int val_stride = 20;
  enum class Mode {
    block_random,  // seeded uniform pick per block
    fixed_stride   // always the first file of each block
  };
  Mode mode = Mode::block_random;
};

struct ClassSplit {
  std::vector<std::string> test;
  std::vector<std::string> val;
  std::vector<std::string> train;
};

// `files` must be non-empty and in a deterministic order.
ClassSplit split_class(const std::vector<std::string>& files, const SplitSpec& spec, Rng& rng);

// Applies the protocol per class with an independent stream per class
// name, so the result does not depend on class iteration order.
std::map<std::string, ClassSplit> split(
    const std::map<std::string, std::vector<std::string>>& files_per_class, const SplitSpec& spec,
    uint64_t seed);

void write_splits_json(const std::map<std::string, ClassSplit>& splits, const SplitSpec& spec,
                       uint64_t seed, const std::filesystem::path& path);
std::map<std::string, ClassSplit> read_splits_json(const std::filesystem::path& path);

// Dataset root layout: images/ + annotations.jsonl + registry.json
// (+ splits.json once emitted). Records are validated eagerly against the
// registry and the image headers; pixels load lazily per sample.
struct Dataset {
  std::filesystem::path root;
  GestureRegistry registry;
  std::vector<AnnotationRecord> records;

  AnnotatedSample materialize(size_t index) const;
};

Dataset load_dataset(const std::filesystem::path& root);

// Parses annotation records only, without touching images or registry;
// enough for splitting and other metadata-level work.
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);

void write_dataset(const std::vector<AnnotatedSample>& samples, const std::filesystem::path& root,
                   const GestureRegistry& registry);

// Procedural samples with exact fingertip ground truth: textured canvas,
// palm disc and limb strokes, one distinctly colored marker per visible
// fingertip. Deterministic per seed.
struct SyntheticConfig {
  int canvas_width = 640;
  int canvas_height = 480;
  int min_box = 200;
  int max_box = 320;
  double marker_radius = 14.0;
  GestureRegistry registry = GestureRegistry::default_registry();
  bool stratified = true;  // cycle classes in registry order
  uint64_t seed = 0;
};

std::vector<AnnotatedSample> generate_synthetic(const SyntheticConfig& config, int count);

// One-shot conversion of an externally labeled corpus into the dataset
// layout. Expects per-class directories with a label.txt of
//   <image.ppm> x_tl y_tl x_br y_br v0..v4 x0 y0 ... x4 y4
// rows (hidden-finger coordinates are ignored). Returns the number of
// imported samples.
int import_corpus(const std::filesystem::path& src, const std::filesystem::path& dst,
                  const GestureRegistry& registry);

}  // namespace unigest

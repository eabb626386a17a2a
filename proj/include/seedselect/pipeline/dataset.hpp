#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "seedselect/io/metadata.hpp"
#include "seedselect/nn/batch.hpp"

namespace seedselect::pipeline {

using ad::Index;

enum class ShapeFamily { Disk, Square, Triangle, Ring };

/// Procedural long-tailed toy dataset. Class i is shape family i % 4 in
/// color i % 3 and has round(head_count * decay^i) training images.
struct DatasetSpec {
  Index n_classes = 12;
  Index head_count = 2000;
  double decay = 0.6;
  Index image_size = 32;
  Index test_per_class = 200;
  double size_min = 0.22;  // object radius as a fraction of the image side
  double size_max = 0.34;
  double position_jitter = 0.14;
  double color_jitter = 0.08;
  double background_noise = 0.04;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when any class gets fewer than 5 images.
  std::vector<Index> train_counts() const;
  void validate() const;

  static ShapeFamily shape_of(Index cls) { return static_cast<ShapeFamily>(cls % 4); }
  static Index color_of(Index cls) { return cls % 3; }
  static std::string class_name(Index cls);

  void to_meta(io::Metadata& m) const;
};

struct ToyDataset {
  nn::LabeledImages train, test;
  std::vector<std::string> class_names;
};

/// One image [1, 3, S, S], quantized to 8 bits so it matches its file.
ad::Tensor<float> render_image(const DatasetSpec& spec, Index cls, Rng& rng);

ToyDataset synth_dataset(const DatasetSpec& spec);

/// Writes train/ and test/ PPM files plus manifest.tsv (path, class id, split).
/// Returns the manifest path.
std::filesystem::path write_dataset(const ToyDataset& data, const std::filesystem::path& dir);

/// Reads a dataset back through its manifest.
ToyDataset load_dataset(const std::filesystem::path& manifest, Index n_classes);

/// Line-delimited caption corpus in which each class phrase (or one of its
/// synonyms) occurs once per training image, mixed with filler captions.
void write_caption_corpus(const DatasetSpec& spec, const std::filesystem::path& path, Index filler_captions);

/// Synonym TSV (class, phrase) matching write_caption_corpus.
void write_synonyms(const DatasetSpec& spec, const std::filesystem::path& path);

}  // namespace seedselect::pipeline

#include "seedselect/pipeline/dataset.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "seedselect/core/error.hpp"
#include "seedselect/io/image.hpp"
#include "seedselect/nn/layers.hpp"

namespace seedselect::pipeline {

namespace {

constexpr std::array<const char*, 3> kColors = {"red", "green", "blue"};
constexpr std::array<const char*, 4> kShapes = {"disk", "square", "triangle", "ring"};
constexpr std::array<const char*, 4> kShapeSynonyms = {"circle", "box", "wedge", "hoop"};
constexpr std::array<std::array<double, 3>, 3> kRgb = {{{0.86, 0.18, 0.16}, {0.20, 0.78, 0.24}, {0.18, 0.32, 0.92}}};

bool inside(ShapeFamily shape, double u, double v, double radius) {
  const double r2 = u * u + v * v;
  switch (shape) {
    case ShapeFamily::Disk:
      return r2 <= radius * radius;
    case ShapeFamily::Square: {
      const double half = radius * 0.82;
      return std::abs(u) <= half && std::abs(v) <= half;
    }
    case ShapeFamily::Triangle: {
      // Equilateral, circumradius = radius, apex up.
      for (int k = 0; k < 3; ++k) {
        const double a = M_PI / 2.0 + 2.0 * M_PI * k / 3.0 + M_PI;
        if (u * std::cos(a) + v * std::sin(a) > radius * 0.5) return false;
      }
      return true;
    }
    case ShapeFamily::Ring:
      return r2 <= radius * radius && r2 >= 0.3 * radius * radius;
  }
  return false;
}

}  // namespace

std::vector<Index> DatasetSpec::train_counts() const {
  std::vector<Index> counts;
  for (Index i = 0; i < n_classes; ++i) {
    counts.push_back(static_cast<Index>(std::llround(static_cast<double>(head_count) * std::pow(decay, i))));
  }
  for (Index i = 0; i < n_classes; ++i) {
    if (counts[static_cast<std::size_t>(i)] < 5) {
      throw std::invalid_argument("dataset spec gives class " + std::to_string(i) + " only " +
                                  std::to_string(counts[static_cast<std::size_t>(i)]) +
                                  " training images (need at least 5)");
    }
  }
  return counts;
}

void DatasetSpec::validate() const {
  if (n_classes < 1) throw std::invalid_argument("dataset spec needs at least one class");
  if (n_classes > 12) throw std::invalid_argument("toy renderer defines 12 distinct classes");
  if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("decay ratio must lie in (0, 1]");
  if (image_size < 8 || image_size % 4 != 0) throw std::invalid_argument("image size must be a multiple of 4, >= 8");
  if (!(size_min > 0.0 && size_min <= size_max && size_max < 0.5)) throw std::invalid_argument("bad object size range");
  if (test_per_class < 1) throw std::invalid_argument("test split needs at least one image per class");
  train_counts();
}

std::string DatasetSpec::class_name(Index cls) {
  return std::string(kColors[static_cast<std::size_t>(color_of(cls))]) + " " +
         kShapes[static_cast<std::size_t>(cls % 4)];
}

void DatasetSpec::to_meta(io::Metadata& m) const {
  io::put_meta(m, "data.n_classes", n_classes);
  io::put_meta(m, "data.head_count", head_count);
  io::put_meta(m, "data.decay", decay);
  io::put_meta(m, "data.image_size", image_size);
  io::put_meta(m, "data.test_per_class", test_per_class);
  io::put_meta(m, "data.seed", seed);
}

ad::Tensor<float> render_image(const DatasetSpec& spec, Index cls, Rng& rng) {
  const Index s = spec.image_size;
  const double side = static_cast<double>(s);
  const ShapeFamily shape = DatasetSpec::shape_of(cls);
  const auto& base = kRgb[static_cast<std::size_t>(DatasetSpec::color_of(cls))];

  const double radius = rng.uniform(spec.size_min, spec.size_max) * side;
  const double cx = side * (0.5 + rng.uniform(-spec.position_jitter, spec.position_jitter));
  const double cy = side * (0.5 + rng.uniform(-spec.position_jitter, spec.position_jitter));
  const double angle = shape == ShapeFamily::Square || shape == ShapeFamily::Triangle ? rng.uniform(-0.35, 0.35) : 0.0;
  const double bright = rng.uniform(0.85, 1.08);
  std::array<double, 3> fg{};
  for (int c = 0; c < 3; ++c) {
    fg[static_cast<std::size_t>(c)] =
        std::clamp(base[static_cast<std::size_t>(c)] * bright + rng.uniform(-spec.color_jitter, spec.color_jitter), 0.0,
                   1.0);
  }
  const double bg_level = rng.uniform(0.06, 0.26);
  std::array<double, 3> bg{};
  for (int c = 0; c < 3; ++c) bg[static_cast<std::size_t>(c)] = bg_level + rng.uniform(-0.03, 0.03);

  ad::Tensor<float> img({1, 3, s, s});
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (Index y = 0; y < s; ++y) {
    for (Index x = 0; x < s; ++x) {
      int hits = 0;
      for (int sy = 0; sy < 2; ++sy) {
        for (int sx = 0; sx < 2; ++sx) {
          const double px = static_cast<double>(x) + 0.25 + 0.5 * sx - cx;
          const double py = static_cast<double>(y) + 0.25 + 0.5 * sy - cy;
          const double u = ca * px + sa * py, v = -sa * px + ca * py;
          hits += inside(shape, u, v, radius) ? 1 : 0;
        }
      }
      const double cover = hits / 4.0;
      for (int c = 0; c < 3; ++c) {
        const double noise = rng.normal() * spec.background_noise;
        const double v = cover * fg[static_cast<std::size_t>(c)] + (1.0 - cover) * bg[static_cast<std::size_t>(c)] + noise;
        const double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
        img[(c * s + y) * s + x] = static_cast<float>(q);
      }
    }
  }
  return img;
}

namespace {

nn::LabeledImages render_split(const DatasetSpec& spec, const std::vector<Index>& counts, std::uint64_t stream) {
  Index total = 0;
  for (Index c : counts) total += c;
  nn::LabeledImages out;
  out.n_classes = spec.n_classes;
  out.images = ad::Tensor<float>({total, 3, spec.image_size, spec.image_size});
  const Index per = 3 * spec.image_size * spec.image_size;
  Index row = 0;
  for (Index cls = 0; cls < spec.n_classes; ++cls) {
    Rng rng(Rng::mix(Rng::mix(spec.seed, stream), static_cast<std::uint64_t>(cls)));
    for (Index i = 0; i < counts[static_cast<std::size_t>(cls)]; ++i, ++row) {
      const auto img = render_image(spec, cls, rng);
      std::copy_n(img.ptr(), per, out.images.ptr() + row * per);
      out.labels.push_back(cls);
    }
  }
  return out;
}

}  // namespace

ToyDataset synth_dataset(const DatasetSpec& spec) {
  spec.validate();
  ToyDataset data;
  data.train = render_split(spec, spec.train_counts(), 1);
  data.test = render_split(spec, std::vector<Index>(static_cast<std::size_t>(spec.n_classes), spec.test_per_class), 2);
  for (Index c = 0; c < spec.n_classes; ++c) data.class_names.push_back(DatasetSpec::class_name(c));
  return data;
}

std::filesystem::path write_dataset(const ToyDataset& data, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "train");
  fs::create_directories(dir / "test");
  const fs::path manifest = dir / "manifest.tsv";
  std::ofstream out(manifest);
  if (!out) throw std::runtime_error("cannot write " + manifest.string());
  auto dump = [&](const nn::LabeledImages& split, const std::string& name) {
    for (Index i = 0; i < split.size(); ++i) {
      char file[32];
      std::snprintf(file, sizeof file, "%06ld.ppm", static_cast<long>(i));
      const fs::path rel = fs::path(name) / file;
      io::write_ppm(dir / rel, nn::gather(split.images, {i}));
      out << rel.generic_string() << '\t' << split.labels[static_cast<std::size_t>(i)] << '\t' << name << '\n';
    }
  };
  dump(data.train, "train");
  dump(data.test, "test");
  if (!out) throw std::runtime_error("write failed for " + manifest.string());
  return manifest;
}

ToyDataset load_dataset(const std::filesystem::path& manifest, Index n_classes) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot read manifest " + manifest.string());
  std::vector<ad::Tensor<float>> train_imgs, test_imgs;
  ToyDataset data;
  data.train.n_classes = data.test.n_classes = n_classes;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string path, split;
    Index cls = -1;
    if (!(row >> path >> cls >> split) || cls < 0 || cls >= n_classes || (split != "train" && split != "test")) {
      throw FormatError("manifest line " + std::to_string(lineno) + " is malformed: " + line);
    }
    auto img = io::read_ppm(manifest.parent_path() / path);
    if (split == "train") {
      train_imgs.push_back(std::move(img));
      data.train.labels.push_back(cls);
    } else {
      test_imgs.push_back(std::move(img));
      data.test.labels.push_back(cls);
    }
  }
  if (train_imgs.empty() || test_imgs.empty()) throw FormatError("manifest lacks a train or test split");
  data.train.images = nn::stack(train_imgs);
  data.test.images = nn::stack(test_imgs);
  for (Index c = 0; c < n_classes; ++c) data.class_names.push_back(DatasetSpec::class_name(c));
  return data;
}

void write_caption_corpus(const DatasetSpec& spec, const std::filesystem::path& path, Index filler_captions) {
  static const std::array<const char*, 6> kLead = {"a photo of a", "my", "the", "an old", "close up of a", "A"};
  static const std::array<const char*, 6> kTail = {"on a dark table", "for sale", "", "in the garden!", "- HD",
                                                   "at night"};
  static const std::array<const char*, 12> kFiller = {"sunset", "over",  "the",    "city",  "portrait", "of",
                                                      "a",      "happy", "dog",    "cheap", "flights",  "2024"};
  const auto counts = spec.train_counts();
  std::vector<Index> order;
  for (Index c = 0; c < spec.n_classes; ++c) {
    for (Index i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) order.push_back(c);
  }
  for (Index i = 0; i < filler_captions; ++i) order.push_back(-1);
  Rng rng(Rng::mix(spec.seed, 7));
  const auto perm = nn::shuffled_range(static_cast<Index>(order.size()), rng);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Index p : perm) {
    const Index cls = order[static_cast<std::size_t>(p)];
    if (cls < 0) {
      const auto words = 3 + rng.below(6);
      for (std::uint64_t w = 0; w < words; ++w) out << (w ? " " : "") << kFiller[rng.below(kFiller.size())];
      out << '\n';
      continue;
    }
    const char* color = kColors[static_cast<std::size_t>(DatasetSpec::color_of(cls))];
    const bool synonym = rng.bernoulli(0.3);
    const char* noun = synonym ? kShapeSynonyms[static_cast<std::size_t>(cls % 4)] : kShapes[static_cast<std::size_t>(cls % 4)];
    std::string c = color;
    if (rng.bernoulli(0.2)) c[0] = static_cast<char>(std::toupper(c[0]));
    static const std::array<const char*, 3> kSep = {" ", "-", ", "};
    out << kLead[rng.below(kLead.size())] << ' ' << c << kSep[rng.below(kSep.size())] << noun << ' '
        << kTail[rng.below(kTail.size())] << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_synonyms(const DatasetSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Index c = 0; c < spec.n_classes; ++c) {
    out << DatasetSpec::class_name(c) << '\t' << kColors[static_cast<std::size_t>(DatasetSpec::color_of(c))] << ' '
        << kShapeSynonyms[static_cast<std::size_t>(c % 4)] << '\n';
  }
}

}  // namespace seedselect::pipeline

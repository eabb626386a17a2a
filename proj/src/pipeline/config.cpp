#include "seedselect/pipeline/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <variant>

#include "seedselect/core/error.hpp"
#include "seedselect/core/hash.hpp"
#include "seedselect/io/metadata.hpp"

namespace seedselect::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text) {
  ConfigFile f;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw FormatError("config line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw FormatError("config line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw FormatError("config line " + std::to_string(lineno) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (f.values_.contains(full)) throw FormatError("config line " + std::to_string(lineno) + ": duplicate key " + full);
    f.values_[full] = trim(line.substr(eq + 1));
  }
  return f;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ConfigFile::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw FormatError("override '" + assignment + "' is not key=value");
  values_[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

namespace {

using Field = std::variant<Index*, int*, std::uint64_t*, double*, bool*, std::string*, std::vector<double>*,
                           std::vector<Index>*>;

struct Binding {
  std::string key;
  Field field;
  bool hashed = true;
};

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) throw FormatError("config " + key + ": bad number '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw FormatError("config " + key + ": bad number '" + v + "'");
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void assign(const Binding& b, const std::string& v) {
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) {
          *p = parse_double(b.key, v);
        } else if constexpr (std::is_same_v<T, bool>) {
          if (v == "true" || v == "1") {
            *p = true;
          } else if (v == "false" || v == "0") {
            *p = false;
          } else {
            throw FormatError("config " + b.key + ": expected true or false, got '" + v + "'");
          }
        } else if constexpr (std::is_same_v<T, std::string>) {
          *p = v;
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          p->clear();
          for (const auto& item : split_list(v)) p->push_back(parse_double(b.key, item));
        } else if constexpr (std::is_same_v<T, std::vector<Index>>) {
          p->clear();
          for (const auto& item : split_list(v)) p->push_back(parse_number<Index>(b.key, item));
        } else {
          *p = parse_number<T>(b.key, v);
        }
      },
      b.field);
}

std::string format(const Field& f) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) {
          return io::format_double(*p);
        } else if constexpr (std::is_same_v<T, bool>) {
          return *p ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return *p;
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          return io::join_doubles(*p);
        } else if constexpr (std::is_same_v<T, std::vector<Index>>) {
          std::string out;
          for (std::size_t i = 0; i < p->size(); ++i) out += (i ? "," : "") + std::to_string((*p)[i]);
          return out;
        } else {
          return std::to_string(*p);
        }
      },
      f);
}

// The single list of config keys; order here is the serialization order.
// Const access goes through a copy, so taking addresses is safe.
std::vector<Binding> bindings(ExperimentConfig& c) {
  auto& d = c.dataset;
  auto& ae = c.autoencoder;
  auto& aet = c.autoencoder_train;
  auto& dn = c.denoiser;
  auto& dnt = c.denoiser_train;
  auto& em = c.embedder;
  auto& emt = c.embedder_train;
  auto& cl = c.classifier;
  auto& clt = c.classifier_train;
  auto& o = c.seedselect;
  auto& b = c.bootstrap;
  auto& e = c.eval;
  auto& co = c.corpus;
  return {
      {"experiment.seed", &c.seed},
      {"experiment.output_dir", &c.output_dir, false},
      {"dataset.n_classes", &d.n_classes},
      {"dataset.head_count", &d.head_count},
      {"dataset.decay", &d.decay},
      {"dataset.image_size", &d.image_size},
      {"dataset.test_per_class", &d.test_per_class},
      {"dataset.size_min", &d.size_min},
      {"dataset.size_max", &d.size_max},
      {"dataset.position_jitter", &d.position_jitter},
      {"dataset.color_jitter", &d.color_jitter},
      {"dataset.background_noise", &d.background_noise},
      {"autoencoder.latent_channels", &ae.latent_channels},
      {"autoencoder.width", &ae.width},
      {"autoencoder.wide_width", &ae.wide_width},
      {"autoencoder.epochs", &aet.epochs},
      {"autoencoder.batch_size", &aet.batch_size},
      {"autoencoder.learning_rate", &aet.learning_rate},
      {"denoiser.width", &dn.width},
      {"denoiser.time_dim", &dn.time_dim},
      {"denoiser.embed_dim", &dn.embed_dim},
      {"denoiser.groups", &dn.groups},
      {"denoiser.train_steps", &dn.train_steps},
      {"denoiser.beta_start", &dn.beta_start},
      {"denoiser.beta_end", &dn.beta_end},
      {"denoiser.epochs", &dnt.epochs},
      {"denoiser.batch_size", &dnt.batch_size},
      {"denoiser.learning_rate", &dnt.learning_rate},
      {"denoiser.p_uncond", &dnt.p_uncond},
      {"embedder.width", &em.width},
      {"embedder.embed_dim", &em.embed_dim},
      {"embedder.epochs", &emt.epochs},
      {"embedder.steps_per_epoch", &emt.steps_per_epoch},
      {"embedder.per_class", &emt.per_class},
      {"embedder.learning_rate", &emt.learning_rate},
      {"embedder.temperature", &emt.temperature},
      {"embedder.max_shift", &emt.max_shift},
      {"classifier.width", &cl.width},
      {"classifier.epochs", &clt.epochs},
      {"classifier.steps_per_epoch", &clt.steps_per_epoch},
      {"classifier.per_class", &clt.per_class},
      {"classifier.learning_rate", &clt.learning_rate},
      {"classifier.max_shift", &clt.max_shift},
      {"classifier.flip", &clt.flip},
      {"seedselect.lambda", &o.lambda},
      {"seedselect.learning_rate", &o.learning_rate},
      {"seedselect.max_iters", &o.max_iters},
      {"seedselect.patience", &o.patience},
      {"seedselect.t_stab", &o.t_stab},
      {"seedselect.sampling_steps", &o.sampling_steps},
      {"seedselect.guidance_scale", &o.guidance_scale},
      {"seedselect.plateau_window", &o.plateau_window},
      {"seedselect.plateau_tol", &o.plateau_tol},
      {"seedselect.contrastive", &o.contrastive},
      {"bootstrap.warm_iters", &b.warm_iters},
      {"bootstrap.subset_iters", &b.subset_iters},
      {"bootstrap.subset_size", &b.subset_size},
      {"bootstrap.full_subsets", &b.full_subsets},
      {"bootstrap.batch", &b.batch},
      {"eval.faithfulness_per_class", &e.faithfulness_per_class},
      {"eval.references", &e.references},
      {"eval.pool_per_class", &e.pool_per_class},
      {"eval.pool_groups", &e.pool_groups},
      {"eval.distribution_samples", &e.distribution_samples},
      {"eval.prdc_k", &e.prdc_k},
      {"eval.prdc_k_max", &e.prdc_k_max},
      {"eval.ndb_bins", &e.ndb_bins},
      {"eval.ndb_k_max", &e.ndb_k_max},
      {"eval.ndb_alpha", &e.ndb_alpha},
      {"eval.split_hi", &e.split_hi},
      {"eval.split_lo", &e.split_lo},
      {"eval.timing_images_per_class", &e.timing_images_per_class},
      {"eval.lambdas", &e.lambdas},
      {"eval.lambda_seeds", &e.lambda_seeds},
      {"eval.lambda_classes", &e.lambda_classes},
      {"eval.lambda_iters", &e.lambda_iters},
      {"eval.augment_shots", &e.augment_shots},
      {"eval.augment_per_class", &e.augment_per_class},
      {"eval.augment_epochs", &e.augment_epochs},
      {"corpus.filler_captions", &co.filler_captions},
      {"corpus.threads", &co.threads, false},
      {"corpus.n_max", &co.n_max},
  };
}

std::string serialize(const ExperimentConfig& cfg, bool hashed_only) {
  ExperimentConfig copy = cfg;
  std::string out, section;
  for (const auto& b : bindings(copy)) {
    if (hashed_only && !b.hashed) continue;
    const auto dot = b.key.find('.');
    const std::string sec = b.key.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "[" : "\n[") + sec + "]\n";
      section = sec;
    }
    out += b.key.substr(dot + 1) + " = " + format(b.field) + "\n";
  }
  return out;
}

}  // namespace

void apply_config(ExperimentConfig& base, const ConfigFile& file) {
  auto list = bindings(base);
  std::string unknown;
  for (const auto& [key, value] : file.values()) {
    auto it = std::find_if(list.begin(), list.end(), [&](const Binding& b) { return b.key == key; });
    if (it == list.end()) {
      unknown += " " + key;
      continue;
    }
    assign(*it, value);
  }
  if (!unknown.empty()) throw FormatError("unknown config key(s):" + unknown);
}

std::string ExperimentConfig::to_text() const { return serialize(*this, false); }

ExperimentConfig ExperimentConfig::from_file(const ConfigFile& file) {
  ExperimentConfig c;
  apply_config(c, file);
  return c;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

std::string ExperimentConfig::hash() const {
  Fnv1a h;
  h.update(serialize(*this, true));
  return hex64(h.digest());
}

void ExperimentConfig::validate() const {
  dataset.validate();
  seedselect.validate();
  bootstrap.validate();
  const auto counts = dataset.train_counts();
  const Index smallest = *std::min_element(counts.begin(), counts.end());
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (autoencoder.latent_channels <= 0 || dataset.image_size % 4 != 0) fail("image size must be divisible by 4");
  if (eval.references < 1 || eval.references > smallest) {
    fail("eval.references must be in [1, " + std::to_string(smallest) + "] (smallest class)");
  }
  if (eval.pool_groups < 1 || eval.pool_per_class % eval.pool_groups != 0) {
    fail("eval.pool_per_class must be a multiple of eval.pool_groups");
  }
  if (eval.faithfulness_per_class < 1 || eval.faithfulness_per_class > eval.pool_per_class) {
    fail("eval.faithfulness_per_class must be in [1, pool_per_class]");
  }
  if (eval.augment_per_class < 0 || eval.augment_per_class > eval.pool_per_class) {
    fail("eval.augment_per_class must be in [0, pool_per_class]");
  }
  if (eval.augment_shots < 1 || eval.augment_shots > eval.references) {
    fail("eval.augment_shots must be in [1, references]");
  }
  if (eval.distribution_samples < 2 || eval.distribution_samples > dataset.n_classes * eval.pool_per_class ||
      eval.distribution_samples > dataset.n_classes * dataset.test_per_class) {
    fail("eval.distribution_samples exceeds the generated pool or the test set");
  }
  if (eval.prdc_k < 0 || eval.prdc_k_max < 2) fail("eval.prdc_k must be >= 0 and prdc_k_max >= 2");
  if (eval.ndb_bins == 1 || eval.ndb_bins < 0 || eval.ndb_k_max < 3) fail("eval.ndb_bins must be 0 or >= 2");
  if (!(eval.ndb_alpha > 0.0 && eval.ndb_alpha < 1.0)) fail("eval.ndb_alpha must be in (0, 1)");
  if (eval.split_lo == 0 || eval.split_hi <= eval.split_lo) fail("eval.split_hi must exceed eval.split_lo > 0");
  if (eval.timing_images_per_class < 1) fail("eval.timing_images_per_class must be positive");
  for (double l : eval.lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) fail("eval.lambdas must lie in [0, 1]");
  }
  for (Index cls : eval.lambda_classes) {
    if (cls < 0 || cls >= dataset.n_classes) fail("eval.lambda_classes out of range");
  }
  if (eval.lambda_seeds < 1 || eval.lambda_iters < 1) fail("eval.lambda_seeds and lambda_iters must be positive");
  if (corpus.filler_captions < 0 || corpus.threads < 0 || corpus.n_max < 1) fail("bad corpus settings");
}

ExperimentConfig ExperimentConfig::resolved() const {
  ExperimentConfig c = *this;
  c.dataset.seed = Rng::mix(seed, 1);
  c.autoencoder_train.seed = Rng::mix(seed, 2);
  c.denoiser_train.seed = Rng::mix(seed, 3);
  c.embedder_train.seed = Rng::mix(seed, 4);
  c.classifier_train.seed = Rng::mix(seed, 5);
  c.seedselect.seed = Rng::mix(seed, 6);
  c.autoencoder.image_size = c.dataset.image_size;
  c.denoiser.latent_channels = c.autoencoder.latent_channels;
  c.denoiser.latent_size = c.autoencoder.latent_size();
  c.denoiser.n_classes = c.dataset.n_classes;
  c.embedder.image_size = c.dataset.image_size;
  c.classifier.image_size = c.dataset.image_size;
  c.classifier.n_classes = c.dataset.n_classes;
  return c;
}

}  // namespace seedselect::pipeline

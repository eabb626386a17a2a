#include "seedselect/eval/faithfulness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "seedselect/eval/stats.hpp"
#include "seedselect/io/metadata.hpp"

namespace seedselect::eval {

const ClassFaithfulness& FaithfulnessCurve::of(Index class_id) const {
  for (const auto& c : classes) {
    if (c.class_id == class_id) return c;
  }
  throw std::out_of_range("class " + std::to_string(class_id) + " not in curve");
}

std::vector<double> FaithfulnessCurve::accuracies_by_id() const {
  Index n = 0;
  for (const auto& c : classes) n = std::max(n, c.class_id + 1);
  std::vector<double> out(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
  for (const auto& c : classes) out[static_cast<std::size_t>(c.class_id)] = c.accuracy;
  return out;
}

namespace {

double mean_or_nan(const std::vector<double>& v) {
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : mean(v);
}

}  // namespace

FaithfulnessCurve aggregate_faithfulness(const std::vector<ClassInfo>& classes, const std::vector<Index>& generated,
                                         const std::vector<Index>& correct,
                                         const std::vector<corpus::ClassCount>& frequencies,
                                         SplitThresholds thresholds) {
  if (classes.empty()) throw std::invalid_argument("faithfulness over zero classes");
  if (generated.size() != classes.size() || correct.size() != classes.size()) {
    throw std::invalid_argument("faithfulness: count vectors do not match class list");
  }
  std::vector<corpus::ClassCount> counts;
  for (const auto& c : classes) {
    auto it = std::find_if(frequencies.begin(), frequencies.end(),
                           [&](const corpus::ClassCount& f) { return f.name == c.name; });
    if (it == frequencies.end()) throw std::invalid_argument("class '" + c.name + "' missing from frequency table");
    counts.push_back(*it);
  }
  const auto ranked = corpus::rank_and_split(counts, thresholds.hi, thresholds.lo);

  FaithfulnessCurve curve;
  std::vector<double> many, med, few, freq, acc;
  for (const auto& r : ranked) {
    const auto k = static_cast<std::size_t>(
        std::find_if(classes.begin(), classes.end(), [&](const ClassInfo& c) { return c.name == r.name; }) -
        classes.begin());
    ClassFaithfulness f;
    f.class_id = classes[k].id;
    f.name = r.name;
    f.frequency = r.count;
    f.generated = generated[k];
    f.correct = correct[k];
    if (f.generated <= 0 || f.correct < 0 || f.correct > f.generated) {
      throw std::invalid_argument("class '" + r.name + "': invalid counts");
    }
    f.accuracy = static_cast<double>(f.correct) / static_cast<double>(f.generated);
    f.split = r.split;
    (r.split == corpus::Split::Many ? many : r.split == corpus::Split::Med ? med : few).push_back(f.accuracy);
    freq.push_back(static_cast<double>(f.frequency));
    acc.push_back(f.accuracy);
    curve.classes.push_back(std::move(f));
  }
  curve.many_mean = mean_or_nan(many);
  curve.med_mean = mean_or_nan(med);
  curve.few_mean = mean_or_nan(few);
  const auto n = static_cast<Index>(acc.size());
  curve.quartile_size = std::max<Index>(1, n / 4);
  const auto q = static_cast<std::ptrdiff_t>(curve.quartile_size);
  curve.top_quartile_mean = mean(std::vector<double>(acc.begin(), acc.begin() + q));
  curve.tail_quartile_mean = mean(std::vector<double>(acc.end() - q, acc.end()));
  curve.spearman = n >= 2 ? spearman(freq, acc) : std::numeric_limits<double>::quiet_NaN();
  return curve;
}

FaithfulnessCurve faithfulness_curve(const ImageGenerator& generator, const models::Classifier<float>& classifier,
                                     const std::vector<ClassInfo>& classes, Index n_per_class,
                                     const std::vector<corpus::ClassCount>& frequencies,
                                     SplitThresholds thresholds) {
  if (n_per_class <= 0) throw std::invalid_argument("n_per_class must be positive");
  // Validate coverage before spending time generating.
  for (const auto& c : classes) {
    if (std::none_of(frequencies.begin(), frequencies.end(),
                     [&](const corpus::ClassCount& f) { return f.name == c.name; })) {
      throw std::invalid_argument("class '" + c.name + "' missing from frequency table");
    }
  }
  std::vector<Index> generated, correct;
  for (const auto& c : classes) {
    const Tensor<float> images = generator(c.id, n_per_class);
    if (images.rank() != 4 || images.dim(0) != n_per_class) {
      throw ShapeError("generator returned " + shape_string(images.shape()) + " for class " + c.name);
    }
    const auto pred = models::predict_labels(classifier, images);
    generated.push_back(n_per_class);
    correct.push_back(static_cast<Index>(std::count(pred.begin(), pred.end(), c.id)));
  }
  return aggregate_faithfulness(classes, generated, correct, frequencies, thresholds);
}

void write_curve_tsv(std::ostream& out, const FaithfulnessCurve& curve) {
  out << "class_id\tname\tfrequency\tsplit\tgenerated\tcorrect\taccuracy\n";
  for (const auto& c : curve.classes) {
    out << c.class_id << '\t' << c.name << '\t' << c.frequency << '\t' << corpus::to_string(c.split) << '\t'
        << c.generated << '\t' << c.correct << '\t' << io::format_double(c.accuracy) << '\n';
  }
}

}  // namespace seedselect::eval

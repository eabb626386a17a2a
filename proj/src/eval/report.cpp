#include "seedselect/eval/report.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"
#include "seedselect/core/error.hpp"

namespace seedselect::eval {

using nlohmann::json;

namespace {

// NaN and infinities have no JSON form; they travel as null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}
std::vector<double> nums(const json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(num(x));
  return out;
}
json num_map(const std::map<std::string, double>& m) {
  json o = json::object();
  for (const auto& [k, v] : m) o[k] = num(v);
  return o;
}
std::map<std::string, double> num_map(const json& j) {
  std::map<std::string, double> out;
  for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = num(it.value());
  return out;
}

corpus::Split split_from(const std::string& s) {
  if (s == "many") return corpus::Split::Many;
  if (s == "med") return corpus::Split::Med;
  if (s == "few") return corpus::Split::Few;
  throw FormatError("unknown split '" + s + "'");
}

json curve_json(const FaithfulnessCurve& c) {
  json classes = json::array();
  for (const auto& f : c.classes) {
    classes.push_back({{"class_id", f.class_id},
                       {"name", f.name},
                       {"frequency", f.frequency},
                       {"generated", f.generated},
                       {"correct", f.correct},
                       {"accuracy", num(f.accuracy)},
                       {"split", corpus::to_string(f.split)}});
  }
  return {{"classes", classes},
          {"many_mean", num(c.many_mean)},
          {"med_mean", num(c.med_mean)},
          {"few_mean", num(c.few_mean)},
          {"quartile_size", c.quartile_size},
          {"top_quartile_mean", num(c.top_quartile_mean)},
          {"tail_quartile_mean", num(c.tail_quartile_mean)},
          {"spearman", num(c.spearman)}};
}

FaithfulnessCurve curve_from(const json& j) {
  FaithfulnessCurve c;
  for (const auto& f : j.at("classes")) {
    ClassFaithfulness x;
    x.class_id = f.at("class_id").get<Index>();
    x.name = f.at("name").get<std::string>();
    x.frequency = f.at("frequency").get<std::uint64_t>();
    x.generated = f.at("generated").get<Index>();
    x.correct = f.at("correct").get<Index>();
    x.accuracy = num(f.at("accuracy"));
    x.split = split_from(f.at("split").get<std::string>());
    c.classes.push_back(std::move(x));
  }
  c.many_mean = num(j.at("many_mean"));
  c.med_mean = num(j.at("med_mean"));
  c.few_mean = num(j.at("few_mean"));
  c.quartile_size = j.at("quartile_size").get<Index>();
  c.top_quartile_mean = num(j.at("top_quartile_mean"));
  c.tail_quartile_mean = num(j.at("tail_quartile_mean"));
  c.spearman = num(j.at("spearman"));
  return c;
}

json arm_json(const ArmMetrics& a) {
  return {{"samples", a.samples},
          {"fid", num(a.fid)},
          {"precision", num(a.prdc.precision)},
          {"recall", num(a.prdc.recall)},
          {"fidelity", num(a.prdc.density)},
          {"diversity", num(a.prdc.coverage)},
          {"prdc_k", a.prdc.k},
          {"ndb", a.ndb},
          {"ndb_bins", a.ndb_bins}};
}

ArmMetrics arm_from(const json& j) {
  ArmMetrics a;
  a.samples = j.at("samples").get<Index>();
  a.fid = num(j.at("fid"));
  a.prdc.precision = num(j.at("precision"));
  a.prdc.recall = num(j.at("recall"));
  a.prdc.density = num(j.at("fidelity"));
  a.prdc.coverage = num(j.at("diversity"));
  a.prdc.k = j.at("prdc_k").get<Eigen::Index>();
  a.ndb = j.at("ndb").get<int>();
  a.ndb_bins = j.at("ndb_bins").get<Index>();
  return a;
}

}  // namespace

std::string EvalReport::to_json(bool include_timings) const {
  json j;
  j["config_hash"] = config_hash;
  j["artifact_hashes"] = artifact_hashes;
  j["model_stats"] = num_map(model_stats);
  j["baseline"] = curve_json(baseline);
  j["seedselect"] = curve_json(seedselect);
  j["prdc_k"] = prdc_k;
  j["ndb_bins"] = ndb_bins;
  j["knn_radius_curve"] = nums(knn_radius_curve);
  j["inertia_curve"] = nums(inertia_curve);
  j["baseline_metrics"] = arm_json(baseline_metrics);
  j["seedselect_metrics"] = arm_json(seedselect_metrics);
  j["bootstrap"] = {{"images", bootstrap.images},
                    {"cold_mean_iterations", num(bootstrap.cold_mean_iterations)},
                    {"warm_mean_iterations", num(bootstrap.warm_mean_iterations)},
                    {"warm_amortized_iterations", num(bootstrap.warm_amortized_iterations)},
                    {"warm_start_iterations", num(bootstrap.warm_start_iterations)},
                    {"cold_iterations", bootstrap.cold_iterations},
                    {"warm_iterations", bootstrap.warm_iterations}};
  json sweep = json::array();
  for (const auto& p : lambda_sweep) {
    sweep.push_back({{"lambda", num(p.lambda)},
                     {"semantic", num(p.semantic)},
                     {"appearance", num(p.appearance)},
                     {"total", num(p.total)},
                     {"seeds", p.seeds}});
  }
  j["lambda_sweep"] = sweep;
  j["augmentation"] = {{"shots", augmentation.shots},
                       {"generated_per_class", augmentation.generated_per_class},
                       {"real_only", num(augmentation.real_only)},
                       {"seedselect_mix", num(augmentation.seedselect_mix)},
                       {"random_mix", num(augmentation.random_mix)},
                       {"real_only_per_class", nums(augmentation.real_only_per_class)},
                       {"seedselect_per_class", nums(augmentation.seedselect_per_class)},
                       {"random_per_class", nums(augmentation.random_per_class)}};
  if (include_timings) j["timings"] = num_map(timings);
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("report is not valid JSON: ") + e.what());
  }
  try {
    EvalReport r;
    r.config_hash = j.at("config_hash").get<std::string>();
    r.artifact_hashes = j.at("artifact_hashes").get<std::map<std::string, std::string>>();
    r.model_stats = num_map(j.at("model_stats"));
    r.baseline = curve_from(j.at("baseline"));
    r.seedselect = curve_from(j.at("seedselect"));
    r.prdc_k = j.at("prdc_k").get<Index>();
    r.ndb_bins = j.at("ndb_bins").get<Index>();
    r.knn_radius_curve = nums(j.at("knn_radius_curve"));
    r.inertia_curve = nums(j.at("inertia_curve"));
    r.baseline_metrics = arm_from(j.at("baseline_metrics"));
    r.seedselect_metrics = arm_from(j.at("seedselect_metrics"));
    const auto& b = j.at("bootstrap");
    r.bootstrap.images = b.at("images").get<Index>();
    r.bootstrap.cold_mean_iterations = num(b.at("cold_mean_iterations"));
    r.bootstrap.warm_mean_iterations = num(b.at("warm_mean_iterations"));
    r.bootstrap.warm_amortized_iterations = num(b.at("warm_amortized_iterations"));
    r.bootstrap.warm_start_iterations = num(b.at("warm_start_iterations"));
    r.bootstrap.cold_iterations = b.at("cold_iterations").get<std::vector<int>>();
    r.bootstrap.warm_iterations = b.at("warm_iterations").get<std::vector<int>>();
    for (const auto& p : j.at("lambda_sweep")) {
      r.lambda_sweep.push_back({num(p.at("lambda")), num(p.at("semantic")), num(p.at("appearance")),
                                num(p.at("total")), p.at("seeds").get<Index>()});
    }
    const auto& a = j.at("augmentation");
    r.augmentation.shots = a.at("shots").get<Index>();
    r.augmentation.generated_per_class = a.at("generated_per_class").get<Index>();
    r.augmentation.real_only = num(a.at("real_only"));
    r.augmentation.seedselect_mix = num(a.at("seedselect_mix"));
    r.augmentation.random_mix = num(a.at("random_mix"));
    r.augmentation.real_only_per_class = nums(a.at("real_only_per_class"));
    r.augmentation.seedselect_per_class = nums(a.at("seedselect_per_class"));
    r.augmentation.random_per_class = nums(a.at("random_per_class"));
    if (j.contains("timings")) r.timings = num_map(j.at("timings"));
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

}  // namespace seedselect::eval

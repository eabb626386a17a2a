// One line per acceptance criterion: "criterion N: PASS|FAIL|BLOCKED <details>".
// Exit status: 1 if any criterion fails, 77 if none fails but some are
// blocked by the host, 0 otherwise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "CLI11.hpp"
#include "seedselect/autodiff/grad_check.hpp"
#include "seedselect/core/log.hpp"
#include "seedselect/corpus/classes.hpp"
#include "seedselect/eval/fid.hpp"
#include "seedselect/eval/ndb.hpp"
#include "seedselect/eval/prdc.hpp"
#include "seedselect/pipeline/experiment.hpp"
#include "seedselect/seed/optimizer.hpp"

using namespace seedselect;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

enum class Verdict { Pass, Fail, Blocked };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) { return {ok ? Verdict::Pass : Verdict::Fail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------- 1

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  diffusion::AutoencoderConfig ac;
  ac.image_size = 16;  // 4 x 4 x 4 = 64 latent elements
  diffusion::DenoiserConfig dc;
  dc.latent_size = 4;
  models::EmbedderConfig ec;
  ec.image_size = 16;
  diffusion::Autoencoder<double> ae(ac, 11);
  diffusion::Denoiser<double> dn(dc, 12);
  models::Embedder<double> emb(ec, 13);
  ae.params().set_trainable(false);
  dn.params().set_trainable(false);
  emb.params().set_trainable(false);
  emb.mark_ready();
  const seed::ModelStack<double> stack{&ae, &dn, &emb};

  Rng img_rng(14);
  ad::Tensor<float> images({3, 3, 16, 16});
  for (ad::Index i = 0; i < images.size(); ++i) images[i] = static_cast<float>(img_rng.uniform());
  const seed::ReferenceSet<double> refs(images, 5, stack);

  seed::OptimizationConfig cfg;
  cfg.sampling_steps = 2;
  cfg.t_stab = 1;
  auto objective = seed::seedselect_objective(stack, seed::ObjectiveTargets<double>{{&refs}, nullptr}, cfg);
  Rng rng(15);
  const auto point = diffusion::random_seed<double>(dc, 1, rng);
  const auto r = ad::grad_check_detailed([&](const ad::Var<double>& s) { return ad::sum(objective(s, {0}).total); },
                                         point, 1e-5);
  const double secs = seconds_since(t0);
  return pass_if(r.max_relative_error <= 1e-3 && secs < 60.0 && point.size() <= 64,
                 fmt("max relative error %.3g over %ld seed elements (worst %ld: analytic %.6g, numeric %.6g), %.1fs",
                     r.max_relative_error, static_cast<long>(point.size()), static_cast<long>(r.worst_index),
                     r.analytic, r.numeric, secs));
}

// ---------------------------------------------------------------- 2 - 9

struct PipelineRun {
  eval::EvalReport report;
  double seconds = 0.0;
  std::map<std::string, double> timings;
};

Outcome long_tail_failure(const PipelineRun& run) {
  const auto& b = run.report.baseline;
  double train_seconds = 0.0;
  for (const auto& [k, v] : run.timings) train_seconds += v;
  return pass_if(b.spearman >= 0.5 && b.top_quartile_mean - b.tail_quartile_mean >= 0.15,
                 fmt("spearman %.3f, top quartile %.3f, bottom quartile %.3f (gap %.1f points); "
                     "stage time %.0fs on %u core(s)",
                     b.spearman, b.top_quartile_mean, b.tail_quartile_mean,
                     100 * (b.top_quartile_mean - b.tail_quartile_mean), train_seconds,
                     std::thread::hardware_concurrency()));
}

Outcome tail_improvement(const PipelineRun& run) {
  const auto& b = run.report.baseline;
  const auto& s = run.report.seedselect;
  const double gain = s.tail_quartile_mean - b.tail_quartile_mean;
  const double head_drop = b.top_quartile_mean - s.top_quartile_mean;
  return pass_if(gain >= 0.10 && head_drop <= 0.03,
                 fmt("bottom quartile %.3f -> %.3f (+%.1f points), top quartile %.3f -> %.3f", b.tail_quartile_mean,
                     s.tail_quartile_mean, 100 * gain, b.top_quartile_mean, s.top_quartile_mean));
}

Outcome quality_parity(const PipelineRun& run) {
  const auto& b = run.report.baseline_metrics;
  const auto& s = run.report.seedselect_metrics;
  return pass_if(s.fid <= 1.3 * b.fid && b.samples >= 1000 && s.samples >= 1000,
                 fmt("FID seedselect %.4f vs baseline %.4f (ratio %.3f), %ld vs %ld samples", s.fid, b.fid,
                     s.fid / b.fid, static_cast<long>(s.samples), static_cast<long>(b.samples)));
}

Outcome diversity_parity(const PipelineRun& run) {
  const auto& b = run.report.baseline_metrics;
  const auto& s = run.report.seedselect_metrics;
  return pass_if(s.prdc.coverage >= 0.85 * b.prdc.coverage && s.ndb <= b.ndb + 2 && run.report.ndb_bins == 20,
                 fmt("coverage %.3f vs %.3f (ratio %.3f), NDB %d vs %d of %ld bins, PRDC k %ld", s.prdc.coverage,
                     b.prdc.coverage, s.prdc.coverage / b.prdc.coverage, s.ndb, b.ndb,
                     static_cast<long>(run.report.ndb_bins), static_cast<long>(run.report.prdc_k)));
}

Outcome bootstrap_speedup(const PipelineRun& run) {
  const auto& t = run.report.bootstrap;
  return pass_if(t.images >= 10 && t.warm_mean_iterations <= 0.5 * t.cold_mean_iterations,
                 fmt("%ld images: cold %.1f iterations, warm bootstrap %.1f per image (%.1f amortized with a %.0f "
                     "iteration warm start)",
                     static_cast<long>(t.images), t.cold_mean_iterations, t.warm_mean_iterations,
                     t.warm_amortized_iterations, t.warm_start_iterations));
}

Outcome lambda_tradeoff(const PipelineRun& run) {
  auto pts = run.report.lambda_sweep;
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.lambda < b.lambda; });
  const std::vector<double> want{0, 0.25, 0.5, 0.75, 0.9, 1};
  bool grid = pts.size() == want.size();
  for (std::size_t i = 0; grid && i < pts.size(); ++i) grid = pts[i].lambda == want[i] && pts[i].seeds >= 5;
  bool appearance = true, semantic = true;
  std::string table;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0) {
      appearance = appearance && pts[i - 1].appearance <= pts[i].appearance;
      semantic = semantic && pts[i - 1].semantic >= pts[i].semantic;
    }
    table += fmt(" %.2f:(sem %.4f, app %.4f)", pts[i].lambda, pts[i].semantic, pts[i].appearance);
  }
  return pass_if(grid && appearance && semantic,
                 fmt("grid %s, appearance monotone %s, semantic monotone %s;", grid ? "ok" : "wrong",
                     appearance ? "yes" : "no", semantic ? "yes" : "no") +
                     table);
}

Outcome augmentation(const PipelineRun& run) {
  const auto& a = run.report.augmentation;
  return pass_if(a.shots == 1 && a.generated_per_class >= 200 && a.seedselect_mix >= a.real_only + 0.05 &&
                     a.seedselect_mix > a.random_mix,
                 fmt("%ld-shot real only %.3f, +%ld seedselect/class %.3f, +random-seed mix %.3f",
                     static_cast<long>(a.shots), a.real_only, static_cast<long>(a.generated_per_class),
                     a.seedselect_mix, a.random_mix));
}

// ---------------------------------------------------------------- 7

// PRDC evaluated straight from the definitions, in plain distances.
struct BruteCounts {
  long precision = 0, recall = 0, density = 0, coverage = 0;
};

BruteCounts brute_prdc(const eval::Features& real, const eval::Features& gen, long k) {
  auto radii = [k](const eval::Features& x) {
    std::vector<double> r;
    for (long i = 0; i < x.rows(); ++i) {
      std::vector<double> d;
      for (long j = 0; j < x.rows(); ++j)
        if (j != i) d.push_back((x.row(i) - x.row(j)).norm());
      std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
      r.push_back(d[k - 1]);
    }
    return r;
  };
  const auto rr = radii(real), rg = radii(gen);
  BruteCounts c;
  for (long j = 0; j < gen.rows(); ++j) {
    long balls = 0;
    for (long i = 0; i < real.rows(); ++i) balls += (gen.row(j) - real.row(i)).norm() < rr[i];
    c.precision += balls > 0;
    c.density += balls;
  }
  for (long i = 0; i < real.rows(); ++i) {
    bool covered = false, recalled = false;
    double nearest = INFINITY;
    for (long j = 0; j < gen.rows(); ++j) {
      const double d = (real.row(i) - gen.row(j)).norm();
      recalled = recalled || d < rg[j];
      nearest = std::min(nearest, d);
    }
    covered = nearest < rr[i];
    c.recall += recalled;
    c.coverage += covered;
  }
  return c;
}

eval::Features gaussian(long n, long d, double shift, std::uint64_t seed) {
  Rng rng(seed);
  eval::Features x(n, d);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < d; ++j) x(i, j) = shift + rng.normal();
  return x;
}

Outcome metric_oracles() {
  std::vector<std::string> bad;
  // PRDC, exact agreement on 50-point sets.
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto real = gaussian(50, 4, 0.0, 100 + s), gen = gaussian(50, 4, 0.3 * s, 200 + s);
    for (long k : {1, 3, 5, 10}) {
      const auto got = eval::prdc(real, gen, k);
      const auto c = brute_prdc(real, gen, k);
      if (got.precision * 50 != c.precision || got.recall * 50 != c.recall || got.coverage * 50 != c.coverage ||
          std::abs(got.density * 50 * k - c.density) > 1e-9) {
        bad.push_back(fmt("prdc seed %lu k %ld", static_cast<unsigned long>(s), k));
      }
    }
  }
  // FID fixtures.
  const auto x = gaussian(400, 5, 0.0, 300);
  const double id = eval::fid(x, x);
  eval::GaussianStats a{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)};
  eval::GaussianStats b{Eigen::VectorXd::Ones(1), 4.0 * Eigen::MatrixXd::Identity(1, 1)};
  const double one_d = eval::frechet_distance(a, b);  // 1 + (1 - 2)^2
  Eigen::MatrixXd m = x.transpose() * x / 400.0 + 0.1 * Eigen::MatrixXd::Identity(5, 5);
  Eigen::VectorXd mu1(5), mu2(5);
  mu1 << 0, 1, 2, 3, 4;
  mu2 << 1, -1, 2, 0.5, 4;
  const double eq_cov = eval::frechet_distance({mu1, m}, {mu2, m});
  const double want_eq = (mu1 - mu2).squaredNorm();
  if (std::abs(id) > 1e-6) bad.push_back(fmt("fid identity %.3g", id));
  if (std::abs(one_d - 2.0) > 1e-6) bad.push_back(fmt("fid 1-d %.9f", one_d));
  if (std::abs(eq_cov - want_eq) > 1e-6) bad.push_back(fmt("fid equal-cov %.9f vs %.9f", eq_cov, want_eq));
  // NDB.
  const auto self = eval::ndb(x, x, 20);
  if (self.count != 0) bad.push_back(fmt("ndb(X,X) = %d", self.count));
  double flagged = 0, bins = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto big = gaussian(2000, 4, 0.0, 1000 + s);
    const auto r = eval::ndb(big.topRows(1000), big.bottomRows(1000), 20, 0.05, s);
    flagged += r.count;
    bins += static_cast<double>(r.bins);
  }
  const double rate = flagged / bins;
  if (rate > 2 * 0.05) bad.push_back(fmt("ndb false positive rate %.3f", rate));
  return pass_if(bad.empty(), fmt("prdc 20 brute-force cases, fid identity %.2g / 1-d %.9f / equal-cov %.9f (want "
                                  "%.9f), ndb(X,X) %d, calibration rate %.4f at alpha 0.05",
                                  id, one_d, eq_cov, want_eq, self.count, rate) +
                                  (bad.empty() ? "" : "; failed: " + bad.front()));
}

// ---------------------------------------------------------------- 10

std::vector<std::string> oracle_tokens(const std::string& line) {
  std::vector<std::string> toks;
  std::string cur;
  for (char ch : line) {
    const auto c = static_cast<unsigned char>(ch);
    const bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (alnum) {
      cur += static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c);
    } else if (!cur.empty()) {
      toks.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) toks.push_back(std::move(cur));
  return toks;
}

// Independent single-threaded count: read the file line by line, count
// unigrams and bigrams, format as "key<TAB>count" by count desc then key.
std::string oracle_tsv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::unordered_map<std::string, std::uint64_t> counts;
  std::string line;
  while (std::getline(in, line)) {
    const auto toks = oracle_tokens(line);
    for (std::size_t i = 0; i < toks.size(); ++i) {
      ++counts[toks[i]];
      if (i + 1 < toks.size()) ++counts[toks[i] + ' ' + toks[i + 1]];
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> v(counts.begin(), counts.end());
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::string out;
  for (const auto& [k, c] : v) out += k + '\t' + std::to_string(c) + '\n';
  return out;
}

void write_fixture_corpus(const fs::path& path, std::uint64_t min_bytes, std::uint64_t min_lines, std::uint64_t seed) {
  static const char* words[] = {"a",      "photo", "of",   "the",  "red",    "blue",     "green",  "disk",
                                "square", "ring",  "pay",  "phone", "Booth", "triangle", "on",     "white",
                                "x1",     "2024",  "caf\xc3\xa9", "na\xc3\xafve", "\xe2\x80\x94", "bad\xff", "Sun-Set",
                                "dog's",  "CAT",   "tree", "sky",  "near",   "small",    "big"};
  Rng rng(seed);
  std::ofstream out(path, std::ios::binary);
  std::uint64_t bytes = 0, lines = 0;
  std::string line;
  // A small vocabulary tail keeps the table large enough to matter.
  while (bytes < min_bytes || lines < min_lines) {
    line.clear();
    const auto n = rng.below(12);
    for (std::uint64_t w = 0; w < n; ++w) {
      if (w) line += rng.below(6) == 0 ? ", " : " ";
      if (rng.below(20) == 0) {
        line += "w" + std::to_string(rng.below(5000));
      } else {
        line += words[rng.below(std::size(words))];
      }
    }
    if (rng.below(50) == 0) line += '\r';
    line += '\n';
    out << line;
    bytes += line.size();
    ++lines;
  }
}

double count_seconds(const fs::path& path, int threads) {
  double best = INFINITY;
  for (int rep = 0; rep < 2; ++rep) {
    const auto t0 = Clock::now();
    const auto t = corpus::count_ngrams_file(path, {threads, 2});
    best = std::min(best, seconds_since(t0));
    if (t.size() == 0) return INFINITY;
  }
  return best;
}

Outcome corpus_correctness(const fs::path& work, bool scaling) {
  fs::create_directories(work);
  std::vector<std::string> bad;

  const auto fixture = work / "fixture_1m.txt";
  write_fixture_corpus(fixture, 0, 1000000, 42);
  const std::string want = oracle_tsv(fixture);
  for (int threads : {1, 2, 8}) {
    if (corpus::count_ngrams_file(fixture, {threads, 2}).to_tsv() != want) bad.push_back(fmt("%d threads", threads));
  }

  using corpus::Split;
  const std::vector<corpus::ClassCount> classes{{"tench", 2000000}, {"goldfish", 1000001}, {"shark", 1000000},
                                                {"hen", 50000},     {"ostrich", 10000},    {"newt", 9999},
                                                {"axolotl", 500},   {"eft", 50000},        {"kite", 0}};
  const std::vector<std::pair<std::string, Split>> hand{
      {"tench", Split::Many}, {"goldfish", Split::Many}, {"shark", Split::Med}, {"eft", Split::Med},
      {"hen", Split::Med},    {"ostrich", Split::Med},   {"newt", Split::Few}, {"axolotl", Split::Few},
      {"kite", Split::Few}};
  const auto ranked = corpus::rank_and_split(classes);
  bool splits_ok = ranked.size() == hand.size();
  for (std::size_t i = 0; splits_ok && i < hand.size(); ++i)
    splits_ok = ranked[i].name == hand[i].first && ranked[i].split == hand[i].second;
  const bool counts_ok = bad.empty();
  if (!splits_ok) bad.push_back("splits");

  std::string detail = fmt("1M-line fixture (%lu tsv bytes) identical to oracle at 1/2/8 threads: %s; splits: %s",
                           static_cast<unsigned long>(want.size()), counts_ok ? "yes" : "no",
                           splits_ok ? "match" : "mismatch");
  fs::remove(fixture);
  if (!scaling) return pass_if(bad.empty(), detail + "; scaling not requested");

  const auto big = work / "scaling_100mb.txt";
  write_fixture_corpus(big, 100ull << 20, 0, 43);
  const auto size = fs::file_size(big);
  const double t1 = count_seconds(big, 1), t4 = count_seconds(big, 4);
  fs::remove(big);
  const double speedup = t1 / t4;
  const unsigned cores = std::thread::hardware_concurrency();
  detail += fmt("; %.0f MB: 1 thread %.2fs (%.0f MB/s), 4 threads %.2fs, speedup %.2fx on %u core(s)",
                static_cast<double>(size) / (1 << 20), t1, static_cast<double>(size) / (1 << 20) / t1, t4, speedup,
                cores);
  if (!bad.empty()) return {Verdict::Fail, detail};
  if (speedup >= 2.5) return {Verdict::Pass, detail};
  if (cores < 4) return {Verdict::Blocked, detail + " (4-thread speedup needs at least 4 cores)"};
  return {Verdict::Fail, detail};
}

// ---------------------------------------------------------------- 11

Outcome determinism(const fs::path& config_path, const fs::path& work) {
  auto cfg = pipeline::ExperimentConfig::load(config_path);
  std::string reports[2];
  for (int i = 0; i < 2; ++i) {
    const auto dir = work / ("determinism_" + std::to_string(i));
    fs::remove_all(dir);
    cfg.output_dir = dir.string();
    reports[i] = pipeline::run_experiment(cfg, {false, false}).to_json();
  }
  std::size_t diff = 0;
  while (diff < reports[0].size() && diff < reports[1].size() && reports[0][diff] == reports[1][diff]) ++diff;
  const bool same = reports[0] == reports[1];
  return pass_if(same, fmt("two fresh runs of config %s: %zu report bytes, %s", cfg.hash().c_str(),
                           reports[0].size(), same ? "byte-identical" : fmt("first difference at byte %zu", diff).c_str()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  std::string out = "acceptance_run", small_config;
  app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
  app.add_option("--out", out, "pipeline output directory, reused between runs");
  app.add_option("--small-config", small_config, "config for the determinism check")->required();
  CLI11_PARSE(app, argc, argv);
  log::set_level(log::Level::Warn);

  const std::set<int> want = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}
                                          : std::set<int>(only.begin(), only.end());
  const fs::path work = fs::path(out) / "acceptance_scratch";

  std::optional<PipelineRun> run;
  auto pipeline_run = [&]() -> const PipelineRun& {
    if (!run) {
      pipeline::ExperimentConfig cfg;
      cfg.output_dir = out;
      const auto t0 = Clock::now();
      pipeline::Experiment ex(cfg, out, {true, false});
      PipelineRun r;
      r.report = ex.run_all();
      r.seconds = seconds_since(t0);
      r.timings = ex.timings();
      run = std::move(r);
    }
    return *run;
  };

  const std::map<int, std::function<Outcome()>> checks{
      {1, gradient_fidelity},
      {2, [&] { return long_tail_failure(pipeline_run()); }},
      {3, [&] { return tail_improvement(pipeline_run()); }},
      {4, [&] { return quality_parity(pipeline_run()); }},
      {5, [&] { return diversity_parity(pipeline_run()); }},
      {6, [&] { return bootstrap_speedup(pipeline_run()); }},
      {7, metric_oracles},
      {8, [&] { return lambda_tradeoff(pipeline_run()); }},
      {9, [&] { return augmentation(pipeline_run()); }},
      {10, [&] { return corpus_correctness(work, true); }},
      {11, [&] { return determinism(small_config, work); }},
  };

  int failed = 0, blocked = 0;
  for (int id : want) {
    const auto it = checks.find(id);
    if (it == checks.end()) {
      std::fprintf(stderr, "no criterion %d\n", id);
      return 2;
    }
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("threw: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "BLOCKED";
    std::printf("criterion %d: %s %s\n", id, tag, o.detail.c_str());
    std::fflush(stdout);
    failed += o.verdict == Verdict::Fail;
    blocked += o.verdict == Verdict::Blocked;
  }
  if (failed) return 1;
  return blocked ? 77 : 0;
}

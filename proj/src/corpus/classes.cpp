#include "seedselect/corpus/classes.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace seedselect::corpus {

void SynonymMap::add(const std::string& class_name, const std::string& phrase) {
  auto& list = entries_[class_name];
  if (std::find(list.begin(), list.end(), phrase) == list.end()) list.push_back(phrase);
}

const std::vector<std::string>& SynonymMap::synonyms(const std::string& class_name) const {
  static const std::vector<std::string> none;
  auto it = entries_.find(class_name);
  return it == entries_.end() ? none : it->second;
}

void SynonymMap::validate(const std::vector<std::string>& classes) const {
  std::map<std::string, std::set<std::string>> owners;
  for (const auto& c : classes) owners[normalize_phrase(c)].insert(c);
  for (const auto& [c, list] : entries_) {
    for (const auto& p : list) owners[normalize_phrase(p)].insert(c);
  }
  std::string msg;
  for (const auto& [phrase, who] : owners) {
    if (phrase.empty()) {
      msg += "\n  empty phrase for class(es):";
      for (const auto& w : who) msg += " '" + w + "'";
      continue;
    }
    if (who.size() < 2) continue;
    msg += "\n  '" + phrase + "' claimed by";
    for (const auto& w : who) msg += " '" + w + "'";
  }
  for (const auto& [c, list] : entries_) {
    if (std::find(classes.begin(), classes.end(), c) == classes.end()) msg += "\n  unknown class '" + c + "'";
  }
  if (!msg.empty()) throw std::invalid_argument("invalid synonym map:" + msg);
}

SynonymMap SynonymMap::parse(std::istream& in) {
  SynonymMap m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() < 2) {
      throw std::invalid_argument("synonym line " + std::to_string(lineno) + ": expected class<TAB>phrase");
    }
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (!fields[i].empty()) m.add(fields[0], fields[i]);
    }
  }
  return m;
}

SynonymMap SynonymMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open synonym file " + path.string());
  return parse(in);
}

namespace {

std::vector<std::string> phrases_of(const std::string& c, const SynonymMap& synonyms) {
  std::vector<std::string> out{normalize_phrase(c)};
  for (const auto& p : synonyms.synonyms(c)) {
    auto n = normalize_phrase(p);
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(std::move(n));
  }
  return out;
}

std::size_t token_count(const std::string& normalized) {
  return normalized.empty() ? 0 : static_cast<std::size_t>(std::count(normalized.begin(), normalized.end(), ' ')) + 1;
}

}  // namespace

std::vector<std::string> long_phrases(const std::vector<std::string>& classes, const SynonymMap& synonyms,
                                      int n_max) {
  std::vector<std::string> out;
  for (const auto& c : classes) {
    for (auto& p : phrases_of(c, synonyms)) {
      if (token_count(p) > static_cast<std::size_t>(n_max) &&
          std::find(out.begin(), out.end(), p) == out.end()) {
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

std::vector<ClassCount> merge_synonyms(const FrequencyTable& ngrams, const SynonymMap& synonyms,
                                       const std::vector<std::string>& classes, const FrequencyTable* phrases,
                                       int n_max) {
  synonyms.validate(classes);
  std::vector<ClassCount> out;
  for (const auto& c : classes) {
    ClassCount cc{c, 0};
    for (const auto& p : phrases_of(c, synonyms)) {
      std::uint64_t n = 0;
      if (token_count(p) <= static_cast<std::size_t>(n_max)) {
        n = ngrams.count(p);
      } else if (phrases) {
        n = phrases->count(p);
      } else {
        throw std::invalid_argument("phrase '" + p + "' is longer than " + std::to_string(n_max) +
                                    " tokens and no phrase counts were given");
      }
      cc.count = saturating_add(cc.count, n);
    }
    out.push_back(std::move(cc));
  }
  return out;
}

std::vector<ClassCount> class_counts_from_file(const std::filesystem::path& path,
                                               const std::vector<std::string>& classes, const SynonymMap& synonyms,
                                               const CountOptions& opt, FrequencyTable* ngrams_out) {
  synonyms.validate(classes);
  FrequencyTable ngrams = count_ngrams_file(path, opt);
  const auto extra = long_phrases(classes, synonyms, opt.n_max);
  FrequencyTable phrases;
  if (!extra.empty()) phrases = count_phrases_file(path, extra, opt.threads);
  auto out = merge_synonyms(ngrams, synonyms, classes, &phrases, opt.n_max);
  if (ngrams_out) *ngrams_out = std::move(ngrams);
  return out;
}

const char* to_string(Split s) {
  switch (s) {
    case Split::Many: return "many";
    case Split::Med: return "med";
    case Split::Few: return "few";
  }
  return "?";
}

std::vector<RankedClass> rank_and_split(const std::vector<ClassCount>& counts, std::uint64_t hi, std::uint64_t lo) {
  if (lo == 0) throw std::invalid_argument("lo threshold must be > 0");
  if (hi <= lo) {
    throw std::invalid_argument("hi threshold " + std::to_string(hi) + " must exceed lo threshold " +
                                std::to_string(lo));
  }
  std::vector<RankedClass> out;
  for (const auto& c : counts) {
    const Split s = c.count > hi ? Split::Many : c.count < lo ? Split::Few : Split::Med;
    out.push_back({c.name, c.count, s});
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedClass& a, const RankedClass& b) {
    return a.count != b.count ? a.count > b.count : a.name < b.name;
  });
  return out;
}

void write_class_counts(std::ostream& out, const std::vector<ClassCount>& counts) {
  out << "class\tcount\n";
  for (const auto& c : counts) out << c.name << '\t' << c.count << '\n';
}

void write_splits(std::ostream& out, const std::vector<RankedClass>& ranked) {
  out << "rank\tclass\tcount\tsplit\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    out << i + 1 << '\t' << ranked[i].name << '\t' << ranked[i].count << '\t' << to_string(ranked[i].split) << '\n';
  }
}

}  // namespace seedselect::corpus

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "seedselect/corpus/frequency.hpp"

namespace seedselect::corpus {

/// class name -> extra phrases counted toward that class.
class SynonymMap {
 public:
  void add(const std::string& class_name, const std::string& phrase);
  const std::vector<std::string>& synonyms(const std::string& class_name) const;
  const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  /// Throws std::invalid_argument listing every normalized phrase claimed by
  /// more than one class (class names included).
  void validate(const std::vector<std::string>& classes) const;

  /// TSV lines "class<TAB>phrase[<TAB>phrase...]"; '#' starts a comment line.
  static SynonymMap parse(std::istream& in);
  static SynonymMap load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

struct ClassCount {
  std::string name;
  std::uint64_t count = 0;
};

/// Every normalized phrase (class names and synonyms) with more tokens
/// than n_max; those need the exact-phrase pass.
std::vector<std::string> long_phrases(const std::vector<std::string>& classes, const SynonymMap& synonyms,
                                      int n_max = 2);

/// Class count = count of its own name plus the counts of its synonyms.
/// Phrases of up to n_max tokens are looked up in `ngrams`, longer ones in
/// `phrases`. Output follows `classes` order; absent phrases count 0.
std::vector<ClassCount> merge_synonyms(const FrequencyTable& ngrams, const SynonymMap& synonyms,
                                       const std::vector<std::string>& classes,
                                       const FrequencyTable* phrases = nullptr, int n_max = 2);

/// Both counting passes over a caption file plus the merge.
std::vector<ClassCount> class_counts_from_file(const std::filesystem::path& path,
                                               const std::vector<std::string>& classes, const SynonymMap& synonyms,
                                               const CountOptions& opt, FrequencyTable* ngrams_out = nullptr);

enum class Split { Many, Med, Few };
const char* to_string(Split s);

struct RankedClass {
  std::string name;
  std::uint64_t count = 0;
  Split split = Split::Med;
};

/// Descending count, ties by name. Many iff count > hi, Few iff count < lo.
std::vector<RankedClass> rank_and_split(const std::vector<ClassCount>& counts, std::uint64_t hi = 1000000,
                                        std::uint64_t lo = 10000);

void write_class_counts(std::ostream& out, const std::vector<ClassCount>& counts);
void write_splits(std::ostream& out, const std::vector<RankedClass>& ranked);

}  // namespace seedselect::corpus

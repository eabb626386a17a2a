#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seedselect/corpus/normalize.hpp"

namespace seedselect::corpus {

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
};

/// n-gram -> count, plus corpus totals. Counts saturate at 2^64 - 1.
class FrequencyTable {
 public:
  using Map = std::unordered_map<std::string, std::uint64_t, StringHash, std::equal_to<>>;

  void add(std::string_view key, std::uint64_t n = 1);
  std::uint64_t count(std::string_view key) const;
  bool contains(std::string_view key) const { return counts_.find(key) != counts_.end(); }

  /// Key-wise sum of counts and totals.
  void merge(const FrequencyTable& other);

  const Map& counts() const { return counts_; }
  std::size_t size() const { return counts_.size(); }

  std::uint64_t total_tokens = 0;
  std::uint64_t total_captions = 0;
  std::uint64_t total_bigrams = 0;
  std::uint64_t invalid_utf8_bytes = 0;
  std::uint64_t saturated = 0;  // additions that hit the count ceiling

  /// Entries by count descending, then key ascending.
  std::vector<std::pair<std::string, std::uint64_t>> sorted() const;

  /// "ngram<TAB>count" lines in sorted() order.
  void write_tsv(std::ostream& out) const;
  std::string to_tsv() const;

 private:
  Map counts_;
};

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b, bool* saturated = nullptr);

/// Adds the n-grams (n = 1..n_max) of one caption.
void count_caption(std::string_view caption, int n_max, FrequencyTable& table, std::string& buffer,
                   std::vector<std::string>& window);

/// Sequential pass over line-delimited captions.
FrequencyTable count_ngrams(std::istream& in, int n_max = 2);
FrequencyTable count_ngrams(const std::vector<std::string>& captions, int n_max = 2);

struct CountOptions {
  int threads = 1;
  int n_max = 2;
};

/// Sharded count of a caption file: each worker takes a byte range aligned
/// to line starts, tables are merged in shard order. Equal to the
/// sequential pass for any thread count.
FrequencyTable count_ngrams_file(const std::filesystem::path& path, const CountOptions& opt);

/// Occurrences of each normalized phrase as a contiguous token run,
/// counted over the same shards.
FrequencyTable count_phrases_file(const std::filesystem::path& path, const std::vector<std::string>& phrases,
                                  int threads = 1);
FrequencyTable count_phrases(const std::vector<std::string>& captions, const std::vector<std::string>& phrases);

/// Byte offsets [begin, end) of `shards` line-aligned ranges of a file.
std::vector<std::pair<std::uint64_t, std::uint64_t>> line_aligned_shards(const std::filesystem::path& path,
                                                                          int shards);

}  // namespace seedselect::corpus

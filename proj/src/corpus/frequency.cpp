#include "seedselect/corpus/frequency.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "seedselect/core/log.hpp"

namespace seedselect::corpus {

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b, bool* saturated) {
  if (a > std::numeric_limits<std::uint64_t>::max() - b) {
    if (saturated) *saturated = true;
    return std::numeric_limits<std::uint64_t>::max();
  }
  return a + b;
}

void FrequencyTable::add(std::string_view key, std::uint64_t n) {
  auto it = counts_.find(key);
  if (it == counts_.end()) {
    counts_.emplace(std::string(key), n);
    return;
  }
  bool sat = false;
  it->second = saturating_add(it->second, n, &sat);
  if (sat) {
    if (saturated++ == 0) log::warn("count for '" + std::string(key) + "' saturated at 2^64 - 1");
  }
}

std::uint64_t FrequencyTable::count(std::string_view key) const {
  auto it = counts_.find(key);
  return it == counts_.end() ? 0 : it->second;
}

void FrequencyTable::merge(const FrequencyTable& other) {
  for (const auto& [k, v] : other.counts_) add(k, v);
  total_tokens = saturating_add(total_tokens, other.total_tokens);
  total_captions = saturating_add(total_captions, other.total_captions);
  total_bigrams = saturating_add(total_bigrams, other.total_bigrams);
  invalid_utf8_bytes += other.invalid_utf8_bytes;
  saturated += other.saturated;
}

std::vector<std::pair<std::string, std::uint64_t>> FrequencyTable::sorted() const {
  std::vector<std::pair<std::string, std::uint64_t>> out(counts_.begin(), counts_.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return out;
}

void FrequencyTable::write_tsv(std::ostream& out) const {
  for (const auto& [k, v] : sorted()) out << k << '\t' << v << '\n';
}

std::string FrequencyTable::to_tsv() const {
  std::ostringstream ss;
  write_tsv(ss);
  return ss.str();
}

void count_caption(std::string_view caption, int n_max, FrequencyTable& table, std::string& buffer,
                   std::vector<std::string>& window) {
  NormalizeStats stats;
  std::uint64_t tokens = 0;
  window.clear();
  std::string gram;
  for_each_token(caption, buffer, &stats, [&](std::string_view tok) {
    ++tokens;
    table.add(tok);
    if (n_max >= 2) {
      if (static_cast<int>(window.size()) == n_max) window.erase(window.begin());
      window.emplace_back(tok);
      // Every n-gram ending at this token, for n = 2..n_max.
      for (std::size_t start = window.size() - 1; start-- > 0;) {
        gram.clear();
        for (std::size_t k = start; k < window.size(); ++k) {
          if (k > start) gram.push_back(' ');
          gram.append(window[k]);
        }
        table.add(gram);
      }
    }
  });
  table.total_tokens += tokens;
  table.total_captions += 1;
  if (n_max >= 2 && tokens > 0) table.total_bigrams += tokens - 1;
  table.invalid_utf8_bytes += stats.invalid_utf8_bytes;
}

FrequencyTable count_ngrams(std::istream& in, int n_max) {
  if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  FrequencyTable table;
  std::string line, buffer;
  std::vector<std::string> window;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    count_caption(line, n_max, table, buffer, window);
    offset += line.size() + 1;
  }
  if (in.bad()) throw std::runtime_error("read error near byte " + std::to_string(offset));
  return table;
}

FrequencyTable count_ngrams(const std::vector<std::string>& captions, int n_max) {
  if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  FrequencyTable table;
  std::string buffer;
  std::vector<std::string> window;
  for (const auto& c : captions) count_caption(c, n_max, table, buffer, window);
  return table;
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> line_aligned_shards(const std::filesystem::path& path,
                                                                          int shards) {
  if (shards < 1) throw std::invalid_argument("need at least one shard");
  std::error_code ec;
  const std::uint64_t size = std::filesystem::file_size(path, ec);
  if (ec) throw std::runtime_error("cannot stat " + path.string() + ": " + ec.message());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint64_t> starts{0};
  for (int s = 1; s < shards; ++s) {
    std::uint64_t pos = size * static_cast<std::uint64_t>(s) / static_cast<std::uint64_t>(shards);
    pos = std::max(pos, starts.back());
    if (pos >= size) {
      starts.push_back(size);
      continue;
    }
    // Advance to the byte after the next newline at or after pos - 1.
    in.clear();
    in.seekg(static_cast<std::streamoff>(pos == 0 ? 0 : pos - 1));
    char c;
    std::uint64_t p = pos == 0 ? 0 : pos - 1;
    if (pos > 0) {
      while (in.get(c)) {
        ++p;
        if (c == '\n') break;
      }
      if (!in) p = size;
    }
    if (in.bad()) throw std::runtime_error("read error in " + path.string() + " at byte " + std::to_string(p));
    starts.push_back(std::max(p, starts.back()));
  }
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    out.emplace_back(starts[i], i + 1 < starts.size() ? starts[i + 1] : size);
  }
  return out;
}

namespace {

/// Calls fn(line) for every line in [begin, end) of the file.
template <typename Fn>
void scan_range(const std::filesystem::path& path, std::uint64_t begin, std::uint64_t end, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  in.seekg(static_cast<std::streamoff>(begin));
  constexpr std::size_t kChunk = 1 << 20;
  std::vector<char> buf(kChunk);
  std::string carry;
  std::uint64_t pos = begin;
  while (pos < end) {
    const auto want = static_cast<std::streamsize>(std::min<std::uint64_t>(kChunk, end - pos));
    in.read(buf.data(), want);
    const auto got = in.gcount();
    if (got <= 0) {
      throw std::runtime_error("read error in " + path.string() + " at byte " + std::to_string(pos));
    }
    std::string_view chunk(buf.data(), static_cast<std::size_t>(got));
    std::size_t start = 0;
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      if (chunk[i] != '\n') continue;
      if (carry.empty()) {
        fn(chunk.substr(start, i - start));
      } else {
        carry.append(chunk.substr(start, i - start));
        fn(std::string_view(carry));
        carry.clear();
      }
      start = i + 1;
    }
    carry.append(chunk.substr(start));
    pos += static_cast<std::uint64_t>(got);
  }
  if (!carry.empty()) fn(std::string_view(carry));
}

template <typename Work>
std::vector<FrequencyTable> run_shards(const std::filesystem::path& path, int threads, Work work) {
  const auto shards = line_aligned_shards(path, std::max(1, threads));
  std::vector<FrequencyTable> tables(shards.size());
  std::vector<std::exception_ptr> errors(shards.size());
  std::vector<std::thread> pool;
  for (std::size_t s = 0; s < shards.size(); ++s) {
    pool.emplace_back([&, s] {
      try {
        work(shards[s].first, shards[s].second, tables[s]);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return tables;
}

void log_invalid(const FrequencyTable& t) {
  if (t.invalid_utf8_bytes > 0) {
    log::warn("replaced " + std::to_string(t.invalid_utf8_bytes) + " invalid UTF-8 byte(s) with separators");
  }
}

}  // namespace

FrequencyTable count_ngrams_file(const std::filesystem::path& path, const CountOptions& opt) {
  if (opt.n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  auto tables = run_shards(path, opt.threads, [&](std::uint64_t b, std::uint64_t e, FrequencyTable& t) {
    std::string buffer;
    std::vector<std::string> window;
    scan_range(path, b, e, [&](std::string_view line) { count_caption(line, opt.n_max, t, buffer, window); });
  });
  FrequencyTable out = std::move(tables.front());
  for (std::size_t s = 1; s < tables.size(); ++s) out.merge(tables[s]);
  log_invalid(out);
  return out;
}

namespace {

struct PhraseIndex {
  // First token -> phrases (token lists) starting with it.
  std::unordered_map<std::string, std::vector<std::vector<std::string>>, StringHash, std::equal_to<>> by_first;
  std::size_t longest = 0;

  explicit PhraseIndex(const std::vector<std::string>& phrases) {
    for (const auto& p : phrases) {
      auto toks = normalize_caption(p);
      if (toks.empty()) throw std::invalid_argument("phrase '" + p + "' has no tokens");
      longest = std::max(longest, toks.size());
      auto& bucket = by_first[toks.front()];
      if (std::find(bucket.begin(), bucket.end(), toks) == bucket.end()) bucket.push_back(std::move(toks));
    }
  }

  void count(std::string_view caption, FrequencyTable& table, std::string& buffer,
             std::vector<std::string>& tokens) const {
    tokens.clear();
    for_each_token(caption, buffer, nullptr, [&](std::string_view tok) { tokens.emplace_back(tok); });
    std::string key;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      auto it = by_first.find(tokens[i]);
      if (it == by_first.end()) continue;
      for (const auto& phrase : it->second) {
        if (i + phrase.size() > tokens.size()) continue;
        if (!std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) continue;
        key.clear();
        for (std::size_t k = 0; k < phrase.size(); ++k) {
          if (k) key.push_back(' ');
          key.append(phrase[k]);
        }
        table.add(key);
      }
    }
    table.total_captions += 1;
  }
};

}  // namespace

FrequencyTable count_phrases(const std::vector<std::string>& captions, const std::vector<std::string>& phrases) {
  const PhraseIndex index(phrases);
  FrequencyTable table;
  std::string buffer;
  std::vector<std::string> tokens;
  for (const auto& c : captions) index.count(c, table, buffer, tokens);
  return table;
}

FrequencyTable count_phrases_file(const std::filesystem::path& path, const std::vector<std::string>& phrases,
                                  int threads) {
  const PhraseIndex index(phrases);
  auto tables = run_shards(path, threads, [&](std::uint64_t b, std::uint64_t e, FrequencyTable& t) {
    std::string buffer;
    std::vector<std::string> tokens;
    scan_range(path, b, e, [&](std::string_view line) { index.count(line, t, buffer, tokens); });
  });
  FrequencyTable out = std::move(tables.front());
  for (std::size_t s = 1; s < tables.size(); ++s) out.merge(tables[s]);
  return out;
}

}  // namespace seedselect::corpus

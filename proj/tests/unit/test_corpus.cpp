#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "doctest.h"
#include "seedselect/core/rng.hpp"
#include "seedselect/corpus/classes.hpp"

using namespace seedselect;
using namespace seedselect::corpus;
namespace fs = std::filesystem;

namespace {

using Words = std::vector<std::string>;

fs::path temp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "seedselect_unit";
  fs::create_directories(dir);
  return dir / name;
}

// Plain ASCII split: every byte outside [A-Za-z0-9] separates.
std::map<std::string, std::uint64_t> oracle_counts(const std::vector<std::string>& lines) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& line : lines) {
    Words toks;
    std::string cur;
    for (char ch : line) {
      const auto c = static_cast<unsigned char>(ch);
      if (std::isalnum(c) && c < 0x80) {
        cur += static_cast<char>(std::tolower(c));
      } else if (!cur.empty()) {
        toks.push_back(cur);
        cur.clear();
      }
    }
    if (!cur.empty()) toks.push_back(cur);
    for (std::size_t i = 0; i < toks.size(); ++i) {
      ++out[toks[i]];
      if (i + 1 < toks.size()) ++out[toks[i] + " " + toks[i + 1]];
    }
  }
  return out;
}

std::vector<std::string> fixture_lines(std::size_t n, std::uint64_t seed) {
  static const char* vocab[] = {"a", "Pay", "phone", "red", "DISK", "blue", "ring", "3", "x2", "caf\xc3\xa9",
                                "na\xc3\xafve", "\xe2\x80\x94", "bad\xff", "of", "the", "photo", "!!", "Tri-angle"};
  Rng rng(seed);
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < n; ++i) {
    std::string line;
    const auto words = rng.below(9);
    for (std::uint64_t w = 0; w < words; ++w) {
      if (w) line += rng.below(5) == 0 ? ", " : " ";
      line += vocab[rng.below(std::size(vocab))];
    }
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p, std::ios::binary);
  for (const auto& l : lines) out << l << '\n';
}

void check_equals_oracle(const FrequencyTable& t, const std::map<std::string, std::uint64_t>& want) {
  CHECK(t.size() == want.size());
  for (const auto& [k, v] : want) CHECK(t.count(k) == v);
}

}  // namespace

TEST_CASE("normalize_caption examples") {
  CHECK(normalize_caption("Hello, World!") == Words{"hello", "world"});
  CHECK(normalize_caption("Pay-Phone #3") == Words{"pay", "phone", "3"});
  CHECK(normalize_caption("").empty());
  CHECK(normalize_caption("  ...  ").empty());
  CHECK(normalize_caption("caf\xc3\xa9 au lait") == Words{"caf", "au", "lait"});
  NormalizeStats st;
  CHECK(normalize_caption("ab\xff\xfe" "cd", &st) == Words{"ab", "cd"});
  CHECK(st.invalid_utf8_bytes == 2);
  CHECK(normalize_phrase("  Pay   PHONE ") == "pay phone");
}

TEST_CASE("normalize_caption is idempotent on its joined output") {
  for (const auto& line : fixture_lines(500, 1)) {
    const auto toks = normalize_caption(line);
    std::string joined;
    for (const auto& t : toks) joined += (joined.empty() ? "" : " ") + t;
    CHECK(normalize_caption(joined) == toks);
  }
}

TEST_CASE("utf8 sequence lengths") {
  CHECK(utf8_sequence_length("a", 0) == 1);
  CHECK(utf8_sequence_length("\xc3\xa9", 0) == 2);
  CHECK(utf8_sequence_length("\xe2\x80\x94", 0) == 3);
  CHECK(utf8_sequence_length("\xf0\x9f\x98\x80", 0) == 4);
  CHECK(utf8_sequence_length("\xc3", 0) == 0);
  CHECK(utf8_sequence_length("\xc0\x80", 0) == 0);  // overlong
  CHECK(utf8_sequence_length("\xed\xa0\x80", 0) == 0);  // surrogate
}

TEST_CASE("count_ngrams hand count") {
  const auto t = count_ngrams(std::vector<std::string>{"a pay phone"});
  CHECK(t.size() == 5);
  CHECK(t.count("a") == 1);
  CHECK(t.count("pay") == 1);
  CHECK(t.count("phone") == 1);
  CHECK(t.count("a pay") == 1);
  CHECK(t.count("pay phone") == 1);
  CHECK(t.count("a phone") == 0);
  CHECK(t.total_tokens == 3);
  CHECK(t.total_captions == 1);
  CHECK(t.total_bigrams == 2);
  CHECK(count_ngrams(std::vector<std::string>{"a pay phone"}, 1).size() == 3);
}

TEST_CASE("bigrams do not cross caption boundaries") {
  std::istringstream in("red disk\nblue ring\n\nring\n");
  const auto t = count_ngrams(in);
  CHECK(t.count("disk blue") == 0);
  CHECK(t.count("ring") == 2);
  CHECK(t.total_captions == 4);
  CHECK(t.total_bigrams == 2);
}

TEST_CASE("count totals invariants") {
  const auto lines = fixture_lines(3000, 2);
  const auto t = count_ngrams(lines);
  std::uint64_t uni = 0, bi = 0, expected_bi = 0;
  for (const auto& [k, v] : t.counts()) {
    CHECK(v >= 1);
    (k.find(' ') == std::string::npos ? uni : bi) += v;
  }
  for (const auto& l : lines) {
    const auto n = normalize_caption(l).size();
    expected_bi += n > 0 ? n - 1 : 0;
  }
  CHECK(uni == t.total_tokens);
  CHECK(bi == expected_bi);
  CHECK(bi == t.total_bigrams);
  check_equals_oracle(t, oracle_counts(lines));
}

TEST_CASE("sharded counting equals the oracle for 1, 2 and 8 threads") {
  const auto lines = fixture_lines(20000, 3);
  const auto path = temp_file("shards.txt");
  write_lines(path, lines);
  const auto want = oracle_counts(lines);
  const auto one = count_ngrams_file(path, {1, 2});
  check_equals_oracle(one, want);
  for (int threads : {2, 8}) {
    const auto t = count_ngrams_file(path, {threads, 2});
    CHECK(t.to_tsv() == one.to_tsv());
    CHECK(t.total_tokens == one.total_tokens);
    CHECK(t.total_captions == one.total_captions);
    CHECK(t.invalid_utf8_bytes == one.invalid_utf8_bytes);
  }
  CHECK(one.total_captions == lines.size());
}

TEST_CASE("line-aligned shards cover the file exactly") {
  const auto path = temp_file("aligned.txt");
  write_lines(path, fixture_lines(997, 4));
  const auto size = fs::file_size(path);
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  for (int k : {1, 2, 3, 8, 64}) {
    const auto shards = line_aligned_shards(path, k);
    REQUIRE(!shards.empty());
    CHECK(shards.front().first == 0);
    CHECK(shards.back().second == size);
    for (std::size_t i = 0; i < shards.size(); ++i) {
      if (i) CHECK(shards[i].first == shards[i - 1].second);
      if (shards[i].first > 0) CHECK(bytes[shards[i].first - 1] == '\n');
    }
  }
}

TEST_CASE("a last line without newline and CRLF endings") {
  const auto path = temp_file("crlf.txt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "red disk\r\nblue ring";
  }
  const auto t = count_ngrams_file(path, {2, 2});
  CHECK(t.total_captions == 2);
  CHECK(t.count("disk") == 1);
  CHECK(t.count("blue ring") == 1);
  CHECK_THROWS(count_ngrams_file(temp_file("does_not_exist.txt"), {1, 2}));
}

TEST_CASE("exact phrase pass counts runs longer than n_max") {
  const std::vector<std::string> caps{"a red pay phone booth", "pay phone booth, pay phone booth", "pay phone"};
  const auto t = count_phrases(caps, {"pay phone booth", "red pay phone booth"});
  CHECK(t.count("pay phone booth") == 3);
  CHECK(t.count("red pay phone booth") == 1);
  const auto path = temp_file("phrases.txt");
  write_lines(path, caps);
  CHECK(count_phrases_file(path, {"Pay Phone Booth"}, 2).count("pay phone booth") == 3);
}

TEST_CASE("saturating counts") {
  const auto max = std::numeric_limits<std::uint64_t>::max();
  bool sat = false;
  CHECK(saturating_add(max - 1, 5, &sat) == max);
  CHECK(sat);
  sat = false;
  CHECK(saturating_add(2, 3, &sat) == 5);
  CHECK_FALSE(sat);
  FrequencyTable t;
  t.add("x", max - 2);
  t.add("x", 10);
  CHECK(t.count("x") == max);
  CHECK(t.saturated == 1);
}

TEST_CASE("TSV export is sorted by count then key") {
  const auto t = count_ngrams(std::vector<std::string>{"b a", "a c", "b"});
  CHECK(t.to_tsv() == "a\t2\nb\t2\na c\t1\nb a\t1\nc\t1\n");
}

TEST_CASE("merge_synonyms") {
  FrequencyTable t;
  t.add("phone", 5);
  t.add("telephone", 3);
  t.add("disk", 2);
  SynonymMap syn;
  syn.add("phone", "telephone");
  const auto counts = merge_synonyms(t, syn, {"phone", "disk", "zebra"});
  REQUIRE(counts.size() == 3);
  CHECK(counts[0].name == "phone");
  CHECK(counts[0].count == 8);
  CHECK(counts[1].count == 2);
  CHECK(counts[2].name == "zebra");
  CHECK(counts[2].count == 0);
  const auto raw = merge_synonyms(t, SynonymMap{}, {"phone", "telephone"});
  CHECK(raw[0].count == 5);
  CHECK(raw[1].count == 3);
}

TEST_CASE("synonym collisions are rejected with the phrase named") {
  SynonymMap syn;
  syn.add("phone", "Cell");
  syn.add("battery", "cell");
  try {
    syn.validate({"phone", "battery"});
    FAIL("expected a collision error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("cell") != std::string::npos);
  }
  SynonymMap by_name;
  by_name.add("phone", "disk");
  CHECK_THROWS_AS(by_name.validate({"phone", "disk"}), std::invalid_argument);
  CHECK_THROWS_AS(merge_synonyms(FrequencyTable{}, by_name, {"phone", "disk"}), std::invalid_argument);
}

TEST_CASE("synonym TSV parsing") {
  std::istringstream in("# comment\nphone\ttelephone\tcell phone\n\ndisk\tcircle\n");
  const auto syn = SynonymMap::parse(in);
  CHECK(syn.synonyms("phone") == Words{"telephone", "cell phone"});
  CHECK(syn.synonyms("disk") == Words{"circle"});
  CHECK(syn.synonyms("ring").empty());
}

TEST_CASE("long class names use the phrase table") {
  SynonymMap syn;
  syn.add("phone", "pay phone booth");
  const std::vector<std::string> classes{"phone", "red disk"};
  CHECK(long_phrases(classes, syn, 2) == Words{"pay phone booth"});
  const std::vector<std::string> caps{"pay phone booth", "a phone", "red disk"};
  const auto ngrams = count_ngrams(caps);
  const auto phrases = count_phrases(caps, long_phrases(classes, syn, 2));
  const auto counts = merge_synonyms(ngrams, syn, classes, &phrases, 2);
  CHECK(counts[0].count == 3);  // two "phone" tokens plus one booth phrase
  CHECK(counts[1].count == 1);
  CHECK_THROWS(merge_synonyms(ngrams, syn, classes, nullptr, 2));
  const auto path = temp_file("classes.txt");
  write_lines(path, caps);
  const auto from_file = class_counts_from_file(path, classes, syn, {2, 2});
  CHECK(from_file[0].count == 3);
  CHECK(from_file[1].count == 1);
}

TEST_CASE("rank_and_split thresholds and ties") {
  const std::vector<ClassCount> counts{{"pear", 500},     {"apple", 2000000}, {"fig", 1000000},
                                       {"kiwi", 50000},   {"lime", 10000},    {"date", 9999},
                                       {"banana", 50000}};
  const auto r = rank_and_split(counts);
  const std::vector<std::string> order{"apple", "fig", "banana", "kiwi", "lime", "date", "pear"};
  const std::vector<Split> splits{Split::Many, Split::Med, Split::Med, Split::Med, Split::Med, Split::Few, Split::Few};
  REQUIRE(r.size() == order.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(r[i].name == order[i]);
    CHECK(r[i].split == splits[i]);
  }
  CHECK_THROWS(rank_and_split(counts, 10, 10));
  CHECK_THROWS(rank_and_split(counts, 10, 0));
  std::ostringstream out;
  write_splits(out, r);
  CHECK(out.str().substr(0, out.str().find('\n')) == "rank\tclass\tcount\tsplit");
  CHECK(out.str().find("1\tapple\t2000000\tmany\n") != std::string::npos);
}

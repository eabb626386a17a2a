#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace seedselect::corpus {

struct NormalizeStats {
  std::uint64_t invalid_utf8_bytes = 0;
};

/// Lowercased ASCII letter/digit runs; everything else (punctuation,
/// whitespace, any non-ASCII code point) separates tokens. Invalid UTF-8
/// bytes act as separators and are counted in `stats`.
std::vector<std::string> normalize_caption(std::string_view text, NormalizeStats* stats = nullptr);

/// Same tokenization, calling `emit(token)` for each token (a view into a
/// buffer reused between tokens) without allocating per caption.
template <typename Emit>
void for_each_token(std::string_view text, std::string& buffer, NormalizeStats* stats, Emit&& emit);

/// Tokens joined with single spaces.
std::string normalize_phrase(std::string_view text);

/// Length of a valid UTF-8 sequence starting at text[i], or 0 when invalid.
std::size_t utf8_sequence_length(std::string_view text, std::size_t i);

template <typename Emit>
void for_each_token(std::string_view text, std::string& buffer, NormalizeStats* stats, Emit&& emit) {
  buffer.clear();
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      if ((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z')) {
        buffer.push_back(static_cast<char>(c));
      } else if (c >= 'A' && c <= 'Z') {
        buffer.push_back(static_cast<char>(c - 'A' + 'a'));
      } else if (!buffer.empty()) {
        emit(std::string_view(buffer));
        buffer.clear();
      }
      ++i;
      continue;
    }
    if (!buffer.empty()) {
      emit(std::string_view(buffer));
      buffer.clear();
    }
    const std::size_t len = utf8_sequence_length(text, i);
    if (len == 0) {
      if (stats) ++stats->invalid_utf8_bytes;
      ++i;
    } else {
      i += len;
    }
  }
  if (!buffer.empty()) {
    emit(std::string_view(buffer));
    buffer.clear();
  }
}

}  // namespace seedselect::corpus

#include "seedselect/corpus/normalize.hpp"

namespace seedselect::corpus {

std::size_t utf8_sequence_length(std::string_view text, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  std::size_t len;
  std::uint32_t cp;
  if (b0 < 0x80) return 1;
  if (b0 >= 0xC2 && b0 <= 0xDF) {
    len = 2;
    cp = b0 & 0x1F;
  } else if (b0 >= 0xE0 && b0 <= 0xEF) {
    len = 3;
    cp = b0 & 0x0F;
  } else if (b0 >= 0xF0 && b0 <= 0xF4) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (i + len > text.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  // Reject overlong forms, surrogates and values past U+10FFFF.
  if ((len == 3 && cp < 0x800) || (len == 4 && (cp < 0x10000 || cp > 0x10FFFF)) || (cp >= 0xD800 && cp <= 0xDFFF)) {
    return 0;
  }
  return len;
}

std::vector<std::string> normalize_caption(std::string_view text, NormalizeStats* stats) {
  std::vector<std::string> tokens;
  std::string buffer;
  for_each_token(text, buffer, stats, [&](std::string_view tok) { tokens.emplace_back(tok); });
  return tokens;
}

std::string normalize_phrase(std::string_view text) {
  std::string out, buffer;
  for_each_token(text, buffer, nullptr, [&](std::string_view tok) {
    if (!out.empty()) out.push_back(' ');
    out.append(tok);
  });
  return out;
}

}  // namespace seedselect::corpus

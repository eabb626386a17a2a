#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "seedselect/core/error.hpp"

namespace seedselect::io {

using Metadata = std::map<std::string, std::string>;

/// Shortest round-trip decimal form.
std::string format_double(double v);

inline void put_meta(Metadata& m, const std::string& key, const std::string& value) { m[key] = value; }
inline void put_meta(Metadata& m, const std::string& key, double value) { m[key] = format_double(value); }
inline void put_meta(Metadata& m, const std::string& key, long value) { m[key] = std::to_string(value); }
inline void put_meta(Metadata& m, const std::string& key, int value) { m[key] = std::to_string(value); }
inline void put_meta(Metadata& m, const std::string& key, std::uint64_t value) { m[key] = std::to_string(value); }

inline const std::string& meta_string(const Metadata& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw FormatError("missing metadata key '" + key + "'");
  return it->second;
}
inline long meta_long(const Metadata& m, const std::string& key) { return std::stol(meta_string(m, key)); }
inline double meta_double(const Metadata& m, const std::string& key) { return std::stod(meta_string(m, key)); }

std::string join_doubles(const std::vector<double>& values);
std::vector<double> split_doubles(const std::string& text);

}  // namespace seedselect::io

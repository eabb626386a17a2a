#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "seedselect/autodiff/tensor.hpp"

namespace seedselect::io {

/// On-disk layout (all integers little-endian):
///   "SSEL" | u32 version
///   u32 n_meta  | n_meta x (u32 len, key bytes, u32 len, value bytes)
///   u32 n_tensor| n_tensor x (u32 len, name bytes, u8 dtype, u32 rank,
///                              rank x u64 extent, raw element data)
/// dtype 0 = f32, 1 = f64.
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'S', 'S', 'E', 'L'};

using AnyTensor = std::variant<ad::Tensor<float>, ad::Tensor<double>>;

struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<std::pair<std::string, AnyTensor>> tensors;

  const std::string& meta(const std::string& key) const;
  bool has_meta(const std::string& key) const { return metadata.contains(key); }

  /// All tensors converted to one scalar type, keyed by name.
  template <typename S>
  std::map<std::string, ad::Tensor<S>> tensors_as() const {
    std::map<std::string, ad::Tensor<S>> out;
    for (const auto& [name, t] : tensors) {
      std::visit([&](const auto& v) { out.emplace(name, v.template cast<S>()); }, t);
    }
    return out;
  }

  template <typename S>
  void add_tensors(const std::map<std::string, ad::Tensor<S>>& values, const std::vector<std::string>& order) {
    for (const auto& name : order) tensors.emplace_back(name, values.at(name));
  }

  /// Hash over metadata and tensor bytes.
  std::uint64_t hash() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

}  // namespace seedselect::io

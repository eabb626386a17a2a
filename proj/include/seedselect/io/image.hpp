#pragma once

#include <filesystem>
#include <string>

#include "seedselect/autodiff/tensor.hpp"

namespace seedselect::io {

/// Binary PPM (P6, maxval 255) for a [1, 3, H, W] or [3, H, W] image in [0, 1].
void write_ppm(const std::filesystem::path& path, const ad::Tensor<float>& image);
std::string encode_ppm(const ad::Tensor<float>& image);

/// Returns [1, 3, H, W] in [0, 1].
ad::Tensor<float> read_ppm(const std::filesystem::path& path);
ad::Tensor<float> decode_ppm(const std::string& bytes);

}  // namespace seedselect::io

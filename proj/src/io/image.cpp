#include "seedselect/io/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "seedselect/core/error.hpp"

namespace seedselect::io {

std::string encode_ppm(const ad::Tensor<float>& image) {
  const auto& s = image.shape();
  const bool batched = s.size() == 4;
  if (!((batched && s[0] == 1 && s[1] == 3) || (s.size() == 3 && s[0] == 3))) {
    throw ShapeError("ppm export needs [1,3,H,W] or [3,H,W], got " + shape_string(s));
  }
  const long h = s[s.size() - 2], w = s[s.size() - 1];
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + static_cast<std::size_t>(3 * h * w));
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (long c = 0; c < 3; ++c) {
        const float v = std::clamp(image[(c * h + y) * w + x], 0.0f, 1.0f);
        out[header + static_cast<std::size_t>((y * w + x) * 3 + c)] =
            static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f)));
      }
    }
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const ad::Tensor<float>& image) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  const std::string bytes = encode_ppm(image);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

ad::Tensor<float> decode_ppm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  long w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w < 1 || h < 1 || maxval != 255) throw FormatError("unsupported ppm header");
  in.get();
  const std::size_t offset = static_cast<std::size_t>(in.tellg());
  if (bytes.size() < offset + static_cast<std::size_t>(3 * w * h)) {
    throw FormatError("ppm truncated at byte " + std::to_string(bytes.size()));
  }
  ad::Tensor<float> out({1, 3, h, w});
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (long c = 0; c < 3; ++c) {
        const auto b = static_cast<unsigned char>(bytes[offset + static_cast<std::size_t>((y * w + x) * 3 + c)]);
        out[(c * h + y) * w + x] = static_cast<float>(b) / 255.0f;
      }
    }
  }
  return out;
}

ad::Tensor<float> read_ppm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_ppm(ss.str());
}

}  // namespace seedselect::io

#include "seedselect/io/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "seedselect/core/error.hpp"
#include "seedselect/core/hash.hpp"

namespace seedselect::io {

namespace {

template <typename T>
void put(std::string& out, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

template <typename S>
void put_tensor(std::string& out, const ad::Tensor<S>& t) {
  put<std::uint8_t>(out, std::is_same_v<S, float> ? 0 : 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
  for (ad::Index i = 0; i < t.size(); ++i) put<S>(out, t[i]);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      auto* b = reinterpret_cast<unsigned char*>(&v);
      std::reverse(b, b + sizeof(T));
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(const char* what) {
    const auto n = get<std::uint32_t>(what);
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated checkpoint while reading ") + what + " at byte " +
                        std::to_string(pos_));
    }
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

template <typename S>
ad::Tensor<S> get_tensor_data(Reader& r, ad::Shape shape) {
  const ad::Index n = ad::numel(shape);
  r.need(static_cast<std::size_t>(n) * sizeof(S), "tensor data");
  typename ad::Tensor<S>::Array data(n);
  for (ad::Index i = 0; i < n; ++i) data[i] = r.get<S>("tensor data");
  return ad::Tensor<S>(std::move(shape), std::move(data));
}

}  // namespace

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw FormatError("checkpoint has no metadata key '" + key + "'");
  return it->second;
}

std::uint64_t Checkpoint::hash() const {
  Fnv1a h;
  const std::string bytes = encode_checkpoint(*this);
  h.update(bytes);
  return h.digest();
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  out.append(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    put_string(out, k);
    put_string(out, v);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_string(out, name);
    std::visit([&](const auto& v) { put_tensor(out, v); }, t);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("not a checkpoint: bad magic bytes");
  }
  Reader r(bytes);
  (void)r.get<std::uint32_t>("magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected version " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  const auto n_meta = r.get<std::uint32_t>("metadata count");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.get_string("metadata key");
    std::string v = r.get_string("metadata value");
    ckpt.metadata.emplace(std::move(k), std::move(v));
  }
  const auto n_tensors = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.get_string("tensor name");
    const auto dtype = r.get<std::uint8_t>("tensor dtype");
    const auto rank = r.get<std::uint32_t>("tensor rank");
    if (rank == 0 || rank > 8) throw FormatError("tensor '" + name + "' has invalid rank " + std::to_string(rank));
    ad::Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto d = r.get<std::uint64_t>("tensor extent");
      if (d == 0 || d > (1ULL << 32)) throw FormatError("tensor '" + name + "' has invalid extent");
      shape.push_back(static_cast<ad::Index>(d));
    }
    if (dtype == 0) {
      ckpt.tensors.emplace_back(std::move(name), get_tensor_data<float>(r, std::move(shape)));
    } else if (dtype == 1) {
      ckpt.tensors.emplace_back(std::move(name), get_tensor_data<double>(r, std::move(shape)));
    } else {
      throw FormatError("tensor '" + name + "' has unknown dtype " + std::to_string(dtype));
    }
  }
  if (r.remaining() != 0) throw FormatError(std::to_string(r.remaining()) + " trailing bytes after checkpoint data");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace seedselect::io

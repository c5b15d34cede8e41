#include "elfdd/tensor/checkpoint.hpp"

#include <cstdio>
#include <fstream>

#include "elfdd/core/binio.hpp"

namespace elfdd {

namespace {
constexpr char kMagic[4] = {'E', 'L', 'F', 'T'};
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint32_t kMaxName = 1u << 16;
}  // namespace

void write_checkpoint(std::ostream& out, const NamedTensors& tensors) {
  const DType dtype = tensors.empty() ? DType::F32 : tensors.front().second.dtype();
  out.write(kMagic, 4);
  binio::put_le<std::uint16_t>(out, kCheckpointVersion);
  binio::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (t.dtype() != dtype) throw ShapeError("checkpoint: mixed dtypes, tensor '" + name + "'");
    binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    binio::put_bytes(out, name);
    binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    dispatch(dtype, [&]<class T>() {
      for (auto v : t.data<T>()) binio::put_float<T>(out, v);
    });
  }
  if (!out) throw FormatError("checkpoint: write failed");
}

NamedTensors read_checkpoint(std::istream& in) {
  const std::string magic = binio::get_bytes(in, 4, "magic");
  if (magic != std::string(kMagic, 4)) throw FormatError("checkpoint: bad magic bytes");
  const auto version = binio::get_le<std::uint16_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto tag = binio::get_le<std::uint8_t>(in, "dtype");
  if (tag > 1) throw FormatError("checkpoint: unknown dtype tag " + std::to_string(tag));
  const auto dtype = static_cast<DType>(tag);
  const auto count = binio::get_le<std::uint32_t>(in, "tensor count");
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = binio::get_le<std::uint32_t>(in, "name length");
    if (name_len > kMaxName) throw FormatError("checkpoint: implausible name length");
    std::string name = binio::get_bytes(in, name_len, "name");
    const auto rank = binio::get_le<std::uint32_t>(in, "rank");
    if (rank == 0 || rank > kMaxRank) throw FormatError("checkpoint: bad rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) {
      d = binio::get_le<std::uint32_t>(in, "dims");
      if (d == 0) throw FormatError("checkpoint: zero dimension in '" + name + "'");
    }
    const auto n = static_cast<std::size_t>(shape_numel(shape));
    Tensor t = dispatch(dtype, [&]<class T>() {
      std::vector<T> values(n);
      for (auto& v : values) v = binio::get_float<T>(in, "tensor data");
      return Tensor::from(shape, std::move(values));
    });
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
  // Write-then-rename so readers never observe a partial file.
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp + " for writing");
    write_checkpoint(out, tensors);
  }
  std::filesystem::rename(tmp, path);
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_checkpoint(in);
}

namespace {

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
  void tensor(const Tensor& t) {
    const auto tag = static_cast<std::uint8_t>(t.dtype());
    bytes(&tag, 1);
    for (auto d : t.shape()) bytes(&d, sizeof d);
    dispatch(t.dtype(), [&]<class T>() {
      auto s = t.data<T>();
      bytes(s.data(), s.size_bytes());
    });
  }
};

}  // namespace

std::uint64_t hash_tensors(const NamedTensors& tensors) {
  Fnv f;
  for (const auto& [name, t] : tensors) {
    f.bytes(name.data(), name.size());
    f.tensor(t);
  }
  return f.h;
}

std::uint64_t hash_tensor(const Tensor& t) {
  Fnv f;
  f.tensor(t);
  return f.h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace elfdd

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "elfdd/tensor/tensor.hpp"

namespace elfdd {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Binary tensor checkpoint, all integers little-endian:
//
//   "ELFT"            4 bytes magic
//   version           u16 (currently 1)
//   dtype             u8  (0 = f32, 1 = f64), shared by every tensor
//   count             u32
//   per tensor:
//     name_len        u32, then name_len bytes of UTF-8
//     rank            u32, then rank x u32 dims
//     data            product(dims) little-endian IEEE-754 elements
//
// An empty list is written with the f32 tag.

inline constexpr std::uint16_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const NamedTensors& tensors);
NamedTensors read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

/// FNV-1a 64 over dtype, shape and raw element bytes of each tensor in order.
std::uint64_t hash_tensors(const NamedTensors& tensors);
std::uint64_t hash_tensor(const Tensor& t);
std::string hex64(std::uint64_t v);

}  // namespace elfdd

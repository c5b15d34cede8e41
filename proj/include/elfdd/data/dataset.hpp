#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "elfdd/tensor/graph.hpp"
#include "elfdd/tensor/prng.hpp"

namespace elfdd::data {

/// Images M x C x H x W with pixels in [0, 1] and integer labels in [0, K).
struct LabeledDataset {
  Tensor images;
  std::vector<int> labels;
  int class_count = 0;
  /// class_indices[k] lists the rows with label k; together they partition [0, M).
  std::vector<std::vector<std::int64_t>> class_indices;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  std::array<std::int64_t, 3> image_shape() const;
  /// Rebuilds class_indices from labels and checks the label range.
  void index_classes();
  LabeledDataset subset(std::span<const std::int64_t> rows) const;
};

/// FNV-1a hash of a dataset's pixels and labels, as 16 hex digits.
std::string dataset_hash(const LabeledDataset& ds);

/// Rows `rows` of an N x ... tensor.
Tensor gather_rows(const Tensor& t, std::span<const std::int64_t> rows);

/// Reads concatenated CIFAR-10 binary records: one label byte followed by
/// 3072 pixel bytes (R plane, G plane, B plane, each 32x32 row-major).
LabeledDataset load_cifar10_binary(const std::filesystem::path& path);
LabeledDataset parse_cifar10_binary(std::span<const unsigned char> bytes);
/// Inverse of the loader; pixels are rounded to the nearest byte.
void write_cifar10_binary(const std::filesystem::path& path, const LabeledDataset& ds);
std::vector<unsigned char> encode_cifar10_binary(const LabeledDataset& ds);

struct ToyShapesConfig {
  int class_count = 8;
  std::int64_t resolution = 16;
  std::int64_t channels = 3;
  std::int64_t samples_per_class = 300;
  /// 0: class-fixed size and colors, only placement jitter. 1: fully random
  /// colors, +-30% size, pixel noise sigma 0.1.
  double noise = 0.6;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Procedural shapes: disk, square, triangle, ring, plus, x-cross,
/// horizontal stripes, vertical stripes (classes 0..7). Placement jitter of
/// up to +-resolution/8 pixels is always applied.
LabeledDataset generate_toy_shapes(const ToyShapesConfig& config);

/// The toy train/test pair: the test split uses a derived seed.
std::pair<LabeledDataset, LabeledDataset> toy_train_test(const ToyShapesConfig& config,
                                                         std::int64_t test_per_class);

/// Dataset <-> tensor-core checkpoint ("images", "labels", "class_count").
void save_dataset(const std::filesystem::path& path, const LabeledDataset& ds);
LabeledDataset load_dataset(const std::filesystem::path& path);

enum class InitMode { RealSample, Noise };
std::string to_string(InitMode m);
InitMode parse_init_mode(const std::string& s);

struct SyntheticDataset {
  Tensor images;  // (K * ipc) x C x H x W
  std::vector<int> labels;
  int ipc = 0;
  int class_count = 0;
  std::string method;
  std::string config_hash;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  /// Rows of class k are [k * ipc, (k + 1) * ipc).
  std::int64_t class_begin(int k) const { return static_cast<std::int64_t>(k) * ipc; }
  std::uint64_t label_hash() const;
  LabeledDataset as_labeled() const;
};

/// Class-major synthetic set. RealSample copies ipc distinct random images of
/// each class; Noise draws U[0, 1).
SyntheticDataset init_synthetic(const LabeledDataset& real, int ipc, InitMode mode, PrngState seed);

/// Clamps pixels to [0, 1].
Tensor clamp01(const Tensor& t);

struct Batch {
  Tensor images;
  std::vector<int> labels;
  std::vector<std::int64_t> rows;
};

/// Without stratification: the first `size` rows of a random permutation.
/// Stratified: size / K rows of every class, class-major. The returned state
/// is the advanced one.
std::pair<Batch, PrngState> sample_batch(const LabeledDataset& ds, std::int64_t size, PrngState state,
                                         bool stratified);
/// n distinct random rows of class k.
std::pair<Batch, PrngState> sample_class(const LabeledDataset& ds, int k, std::int64_t n, PrngState state);

/// Random permutation of [0, n).
std::vector<std::int64_t> permutation(std::int64_t n, Rng& rng);

/// Writes an 8-bit RGB (or gray) PNG of a class-major image grid: one row per
/// class, `cols` images per row, each pixel upscaled by `zoom`.
void write_png_grid(const std::filesystem::path& path, const Tensor& images, std::int64_t rows,
                    std::int64_t cols, int zoom = 2);

}  // namespace elfdd::data

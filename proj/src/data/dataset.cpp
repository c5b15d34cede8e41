#include "elfdd/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include "elfdd/core/error.hpp"
#include "elfdd/tensor/checkpoint.hpp"

namespace elfdd::data {

std::array<std::int64_t, 3> LabeledDataset::image_shape() const {
  if (!images.defined() || images.rank() != 4) return {0, 0, 0};
  return {images.dim(1), images.dim(2), images.dim(3)};
}

void LabeledDataset::index_classes() {
  if (images.defined() && images.dim(0) != size()) {
    throw ShapeError("dataset has " + std::to_string(images.dim(0)) + " images but " +
                     std::to_string(size()) + " labels");
  }
  class_indices.assign(static_cast<std::size_t>(class_count), {});
  for (std::int64_t i = 0; i < size(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= class_count) {
      throw ValueError("label " + std::to_string(y) + " at row " + std::to_string(i) + " outside [0, " +
                       std::to_string(class_count) + ")");
    }
    class_indices[static_cast<std::size_t>(y)].push_back(i);
  }
}

Tensor gather_rows(const Tensor& t, std::span<const std::int64_t> rows) {
  const std::int64_t stride = t.numel() / t.dim(0);
  Shape shape = t.shape();
  shape[0] = static_cast<std::int64_t>(rows.size());
  return dispatch(t.dtype(), [&]<class T>() {
    auto src = t.data<T>();
    std::vector<T> out(rows.size() * static_cast<std::size_t>(stride));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] < 0 || rows[i] >= t.dim(0)) throw ValueError("row index out of range");
      std::copy_n(src.begin() + rows[i] * stride, stride, out.begin() + static_cast<std::ptrdiff_t>(i) * stride);
    }
    return Tensor::from(shape, std::move(out));
  });
}

LabeledDataset LabeledDataset::subset(std::span<const std::int64_t> rows) const {
  LabeledDataset out;
  out.images = gather_rows(images, rows);
  out.class_count = class_count;
  for (auto r : rows) out.labels.push_back(labels[static_cast<std::size_t>(r)]);
  out.index_classes();
  return out;
}

// CIFAR-10 ------------------------------------------------------------------

namespace {
constexpr std::int64_t kCifarPixels = 3 * 32 * 32;
constexpr std::int64_t kCifarRecord = kCifarPixels + 1;
}  // namespace

LabeledDataset parse_cifar10_binary(std::span<const unsigned char> bytes) {
  const auto total = static_cast<std::int64_t>(bytes.size());
  const std::int64_t records = total / kCifarRecord;
  if (total % kCifarRecord != 0) {
    throw FormatError("truncated CIFAR-10 file: record " + std::to_string(records) + " at byte offset " +
                      std::to_string(records * kCifarRecord) + " needs " + std::to_string(kCifarRecord) +
                      " bytes, " + std::to_string(total - records * kCifarRecord) + " remain");
  }
  LabeledDataset ds;
  ds.class_count = 10;
  if (records == 0) {
    ds.index_classes();
    return ds;
  }
  std::vector<float> px(static_cast<std::size_t>(records * kCifarPixels));
  for (std::int64_t r = 0; r < records; ++r) {
    const auto offset = r * kCifarRecord;
    const int label = bytes[static_cast<std::size_t>(offset)];
    if (label > 9) {
      throw FormatError("CIFAR-10 label byte " + std::to_string(label) + " > 9 at byte offset " +
                        std::to_string(offset));
    }
    ds.labels.push_back(label);
    for (std::int64_t p = 0; p < kCifarPixels; ++p) {
      px[static_cast<std::size_t>(r * kCifarPixels + p)] =
          static_cast<float>(bytes[static_cast<std::size_t>(offset + 1 + p)]) / 255.0f;
    }
  }
  ds.images = Tensor::from({records, 3, 32, 32}, std::move(px));
  ds.index_classes();
  return ds;
}

LabeledDataset load_cifar10_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_cifar10_binary(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<unsigned char> encode_cifar10_binary(const LabeledDataset& ds) {
  std::vector<unsigned char> out;
  if (ds.size() == 0) return out;
  if (ds.image_shape() != std::array<std::int64_t, 3>{3, 32, 32}) {
    throw ShapeError("CIFAR-10 layout needs 3x32x32 images");
  }
  out.reserve(static_cast<std::size_t>(ds.size() * kCifarRecord));
  for (std::int64_t r = 0; r < ds.size(); ++r) {
    const int y = ds.labels[static_cast<std::size_t>(r)];
    if (y < 0 || y > 9) throw ValueError("CIFAR-10 labels must be in 0..9");
    out.push_back(static_cast<unsigned char>(y));
    for (std::int64_t p = 0; p < kCifarPixels; ++p) {
      const double v = std::clamp(ds.images.flat(r * kCifarPixels + p), 0.0, 1.0);
      out.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
  }
  return out;
}

void write_cifar10_binary(const std::filesystem::path& path, const LabeledDataset& ds) {
  const auto bytes = encode_cifar10_binary(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Toy shapes ----------------------------------------------------------------

void ToyShapesConfig::validate() const {
  if (class_count < 1 || class_count > 8) throw ConfigError("toy class_count must be in 1..8");
  if (resolution < 8) throw ConfigError("toy resolution must be at least 8");
  if (channels != 1 && channels != 3) throw ConfigError("toy channels must be 1 or 3");
  if (samples_per_class < 1) throw ConfigError("toy samples_per_class must be positive");
  if (noise < 0.0 || noise > 1.0) throw ConfigError("toy noise must be in [0, 1]");
}

namespace {

using Rgb = std::array<double, 3>;

constexpr Rgb kClassColor[8] = {{0.9, 0.2, 0.2}, {0.2, 0.85, 0.25}, {0.25, 0.35, 0.95}, {0.95, 0.9, 0.2},
                                {0.85, 0.25, 0.85}, {0.2, 0.85, 0.9}, {0.95, 0.55, 0.1}, {0.95, 0.95, 0.95}};
constexpr Rgb kBackground = {0.1, 0.1, 0.1};

// Shape membership in coordinates normalized by the shape radius.
bool inside(int k, double u, double v) {
  switch (k) {
    case 0: return u * u + v * v <= 1.0;
    case 1: return std::max(std::abs(u), std::abs(v)) <= 0.85;
    case 2: return v <= 0.75 && v >= -0.9 + 1.737 * std::abs(u);
    case 3: {
      const double r2 = u * u + v * v;
      return r2 <= 1.0 && r2 >= 0.55 * 0.55;
    }
    case 4: return (std::abs(u) <= 0.3 && std::abs(v) <= 1.0) || (std::abs(v) <= 0.3 && std::abs(u) <= 1.0);
    case 5: {
      const double a = (u + v) / std::numbers::sqrt2, b = (u - v) / std::numbers::sqrt2;
      return (std::abs(a) <= 0.25 && std::abs(b) <= 1.0) || (std::abs(b) <= 0.25 && std::abs(a) <= 1.0);
    }
    case 6:
      return std::abs(u) <= 1.0 && std::abs(v) <= 1.0 && static_cast<int>(std::floor((v + 1.0) / 0.4)) % 2 == 0;
    case 7:
      return std::abs(u) <= 1.0 && std::abs(v) <= 1.0 && static_cast<int>(std::floor((u + 1.0) / 0.4)) % 2 == 0;
    default: return false;
  }
}

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

Rgb random_rgb(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

double dist(const Rgb& a, const Rgb& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

void render(int k, const ToyShapesConfig& cfg, Rng& rng, float* out) {
  const double res = static_cast<double>(cfg.resolution);
  const double noise = cfg.noise;
  const double jitter = res / 8.0;
  const double cx = res / 2.0 + rng.uniform(-jitter, jitter);
  const double cy = res / 2.0 + rng.uniform(-jitter, jitter);
  const double radius = 0.3 * res * (1.0 + 0.3 * noise * rng.uniform(-1.0, 1.0));
  const double angle = noise * rng.uniform(-1.0, 1.0) * std::numbers::pi / 12.0;
  Rgb bg = lerp(kBackground, random_rgb(rng), noise);
  Rgb fg = lerp(kClassColor[k], random_rgb(rng), noise);
  for (int tries = 0; tries < 16 && dist(fg, bg) < 0.35; ++tries) {
    fg = lerp(kClassColor[k], random_rgb(rng), noise);
  }
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double sigma = 0.1 * noise;
  const auto plane = cfg.resolution * cfg.resolution;
  constexpr int kSub = 3;
  for (std::int64_t i = 0; i < cfg.resolution; ++i) {
    for (std::int64_t j = 0; j < cfg.resolution; ++j) {
      int hits = 0;
      for (int a = 0; a < kSub; ++a) {
        for (int b = 0; b < kSub; ++b) {
          const double y = static_cast<double>(i) + (a + 0.5) / kSub - cy;
          const double x = static_cast<double>(j) + (b + 0.5) / kSub - cx;
          const double u = (ca * x + sa * y) / radius, v = (-sa * x + ca * y) / radius;
          if (inside(k, u, v)) ++hits;
        }
      }
      const double alpha = hits / static_cast<double>(kSub * kSub);
      const Rgb c = lerp(bg, fg, alpha);
      if (cfg.channels == 1) {
        double g = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
        if (sigma > 0) g += sigma * rng.normal();
        out[i * cfg.resolution + j] = static_cast<float>(std::clamp(g, 0.0, 1.0));
      } else {
        for (int ch = 0; ch < 3; ++ch) {
          double val = c[static_cast<std::size_t>(ch)];
          if (sigma > 0) val += sigma * rng.normal();
          out[ch * plane + i * cfg.resolution + j] = static_cast<float>(std::clamp(val, 0.0, 1.0));
        }
      }
    }
  }
}

}  // namespace

LabeledDataset generate_toy_shapes(const ToyShapesConfig& config) {
  config.validate();
  const auto k = static_cast<std::int64_t>(config.class_count);
  const auto n = k * config.samples_per_class;
  const auto image = config.channels * config.resolution * config.resolution;
  std::vector<float> px(static_cast<std::size_t>(n * image));
  LabeledDataset ds;
  ds.class_count = config.class_count;
  ds.labels.resize(static_cast<std::size_t>(n));
  const Rng root(config.seed);
  // Interleaved class order so that any prefix is roughly balanced.
  for (std::int64_t s = 0; s < config.samples_per_class; ++s) {
    for (std::int64_t c = 0; c < k; ++c) {
      const auto row = s * k + c;
      Rng rng = root.split(static_cast<std::uint64_t>(c)).split(static_cast<std::uint64_t>(s));
      render(static_cast<int>(c), config, rng, px.data() + row * image);
      ds.labels[static_cast<std::size_t>(row)] = static_cast<int>(c);
    }
  }
  ds.images = Tensor::from({n, config.channels, config.resolution, config.resolution}, std::move(px));
  ds.index_classes();
  return ds;
}

std::pair<LabeledDataset, LabeledDataset> toy_train_test(const ToyShapesConfig& config,
                                                         std::int64_t test_per_class) {
  auto train = generate_toy_shapes(config);
  ToyShapesConfig t = config;
  t.seed = mix64(config.seed ^ 0x5eed7e57ULL);
  t.samples_per_class = test_per_class;
  return {std::move(train), generate_toy_shapes(t)};
}

void save_dataset(const std::filesystem::path& path, const LabeledDataset& ds) {
  std::vector<double> labels(ds.labels.begin(), ds.labels.end());
  NamedTensors ts{{"images", ds.images.to(DType::F32)},
                  {"labels", Tensor::from({static_cast<std::int64_t>(labels.size())}, labels).to(DType::F32)},
                  {"class_count", Tensor::scalar(ds.class_count)}};
  save_checkpoint(path, ts);
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  const auto ts = load_checkpoint(path);
  LabeledDataset ds;
  for (const auto& [name, t] : ts) {
    if (name == "images") ds.images = t;
    if (name == "labels") {
      for (double v : t.to_vector()) ds.labels.push_back(static_cast<int>(v));
    }
    if (name == "class_count") ds.class_count = static_cast<int>(t.item());
  }
  if (!ds.images.defined() || ds.class_count <= 0) throw FormatError(path.string() + " is not a dataset file");
  ds.index_classes();
  return ds;
}

// Synthetic sets --------------------------------------------------------------

std::string to_string(InitMode m) { return m == InitMode::Noise ? "noise" : "real"; }

InitMode parse_init_mode(const std::string& s) {
  if (s == "real" || s == "RealSample") return InitMode::RealSample;
  if (s == "noise" || s == "Noise") return InitMode::Noise;
  throw ConfigError("unknown init mode '" + s + "' (expected real or noise)");
}

std::uint64_t SyntheticDataset::label_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int y : labels) {
    h ^= static_cast<std::uint64_t>(y);
    h *= 0x100000001b3ULL;
  }
  return h;
}

LabeledDataset SyntheticDataset::as_labeled() const {
  LabeledDataset ds;
  ds.images = images;
  ds.labels = labels;
  ds.class_count = class_count;
  ds.index_classes();
  return ds;
}

SyntheticDataset init_synthetic(const LabeledDataset& real, int ipc, InitMode mode, PrngState seed) {
  if (ipc < 1) throw ConfigError("ipc must be positive");
  const int k = real.class_count;
  const auto shape = real.image_shape();
  SyntheticDataset s;
  s.ipc = ipc;
  s.class_count = k;
  for (int c = 0; c < k; ++c) s.labels.insert(s.labels.end(), static_cast<std::size_t>(ipc), c);
  Rng rng(seed);
  if (mode == InitMode::Noise) {
    s.images = random_uniform({static_cast<std::int64_t>(k) * ipc, shape[0], shape[1], shape[2]}, rng, 0.0, 1.0,
                              real.images.dtype());
  } else {
    std::vector<std::int64_t> rows;
    for (int c = 0; c < k; ++c) {
      auto pool = real.class_indices[static_cast<std::size_t>(c)];
      if (static_cast<int>(pool.size()) < ipc) {
        throw ValueError("class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                         " real samples, fewer than ipc=" + std::to_string(ipc));
      }
      Rng cls = rng.split(static_cast<std::uint64_t>(c));
      cls.shuffle(std::span<std::int64_t>(pool));
      rows.insert(rows.end(), pool.begin(), pool.begin() + ipc);
    }
    s.images = gather_rows(real.images, rows);
  }
  return s;
}

Tensor clamp01(const Tensor& t) {
  return dispatch(t.dtype(), [&]<class T>() {
    auto src = t.data<T>();
    std::vector<T> out(src.begin(), src.end());
    for (auto& v : out) v = std::clamp(v, T(0), T(1));
    return Tensor::from(t.shape(), std::move(out));
  });
}

// Batching ----------------------------------------------------------------

std::vector<std::int64_t> permutation(std::int64_t n, Rng& rng) {
  std::vector<std::int64_t> p(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  rng.shuffle(std::span<std::int64_t>(p));
  return p;
}

namespace {
Batch make_batch(const LabeledDataset& ds, std::vector<std::int64_t> rows) {
  Batch b;
  b.images = gather_rows(ds.images, rows);
  for (auto r : rows) b.labels.push_back(ds.labels[static_cast<std::size_t>(r)]);
  b.rows = std::move(rows);
  return b;
}
}  // namespace

std::pair<Batch, PrngState> sample_class(const LabeledDataset& ds, int k, std::int64_t n, PrngState state) {
  if (k < 0 || k >= ds.class_count) throw ValueError("class " + std::to_string(k) + " out of range");
  const auto& pool = ds.class_indices[static_cast<std::size_t>(k)];
  if (n < 1 || n > static_cast<std::int64_t>(pool.size())) {
    throw ValueError("cannot draw " + std::to_string(n) + " samples from class " + std::to_string(k) + " of size " +
                     std::to_string(pool.size()));
  }
  Rng rng(state);
  auto perm = permutation(static_cast<std::int64_t>(pool.size()), rng);
  std::vector<std::int64_t> rows;
  for (std::int64_t i = 0; i < n; ++i) rows.push_back(pool[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
  return {make_batch(ds, std::move(rows)), rng.state()};
}

std::pair<Batch, PrngState> sample_batch(const LabeledDataset& ds, std::int64_t size, PrngState state,
                                         bool stratified) {
  if (size < 1) throw ValueError("batch size must be positive");
  if (!stratified) {
    if (size > ds.size()) {
      throw ValueError("batch size " + std::to_string(size) + " exceeds dataset size " + std::to_string(ds.size()));
    }
    Rng rng(state);
    auto perm = permutation(ds.size(), rng);
    perm.resize(static_cast<std::size_t>(size));
    return {make_batch(ds, std::move(perm)), rng.state()};
  }
  if (size % ds.class_count != 0) {
    throw ValueError("stratified batch size " + std::to_string(size) + " is not divisible by K=" +
                     std::to_string(ds.class_count));
  }
  const auto per = size / ds.class_count;
  std::vector<std::int64_t> rows;
  for (int k = 0; k < ds.class_count; ++k) {
    auto [b, next] = sample_class(ds, k, per, state);
    state = next;
    rows.insert(rows.end(), b.rows.begin(), b.rows.end());
  }
  return {make_batch(ds, std::move(rows)), state};
}

std::string dataset_hash(const LabeledDataset& ds) {
  std::vector<double> labels(ds.labels.begin(), ds.labels.end());
  NamedTensors ts{{"images", ds.images}};
  if (!labels.empty()) ts.emplace_back("labels", Tensor::from({static_cast<std::int64_t>(labels.size())}, labels));
  return hex64(hash_tensors(ts));
}

}  // namespace elfdd::data

#include "elfdd/data/augment.hpp"

#include <cmath>

#include "elfdd/core/error.hpp"

namespace elfdd::data {

std::string to_string(AugOp op) {
  switch (op) {
    case AugOp::HFlip: return "flip";
    case AugOp::ShiftCrop: return "crop";
    case AugOp::Cutout: return "cutout";
    case AugOp::Scale: return "scale";
  }
  return "?";
}

AugOp parse_aug_op(const std::string& s) {
  if (s == "flip" || s == "hflip" || s == "HFlip") return AugOp::HFlip;
  if (s == "crop" || s == "shift" || s == "ShiftCrop") return AugOp::ShiftCrop;
  if (s == "cutout" || s == "Cutout") return AugOp::Cutout;
  if (s == "scale" || s == "Scale") return AugOp::Scale;
  throw ConfigError("unknown augmentation '" + s + "'");
}

void AugmentConfig::validate() const {
  if (max_shift < 0.0 || max_shift > 0.25) throw ConfigError("augment shift must be within 25% of the side");
  if (scale_lo < 0.8 || scale_hi > 1.2 || scale_lo > scale_hi) {
    throw ConfigError("augment scale range must lie in [0.8, 1.2]");
  }
  if (cutout < 0.0 || cutout > 1.0) throw ConfigError("augment cutout fraction must be in [0, 1]");
}

AugmentLog sample_augment(const AugmentConfig& config, std::int64_t h, std::int64_t w, Rng& rng) {
  config.validate();
  AugmentLog log;
  if (config.ops.empty()) return log;
  std::vector<AugOp> chosen = config.ops;
  if (config.single) chosen = {config.ops[rng.below(config.ops.size())]};
  for (AugOp op : chosen) {
    AugmentDraw d;
    d.op = op;
    switch (op) {
      case AugOp::HFlip: d.flip = rng.coin(); break;
      case AugOp::ShiftCrop: {
        const auto mx = static_cast<std::int64_t>(std::floor(config.max_shift * static_cast<double>(w)));
        const auto my = static_cast<std::int64_t>(std::floor(config.max_shift * static_cast<double>(h)));
        d.dx = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(2 * mx + 1))) - mx;
        d.dy = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(2 * my + 1))) - my;
        break;
      }
      case AugOp::Cutout:
        d.size = static_cast<std::int64_t>(std::lround(config.cutout * static_cast<double>(std::min(h, w))));
        d.cx = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(w)));
        d.cy = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(h)));
        break;
      case AugOp::Scale:
        d.sx = rng.uniform(config.scale_lo, config.scale_hi);
        d.sy = rng.uniform(config.scale_lo, config.scale_hi);
        break;
    }
    log.push_back(d);
  }
  return log;
}

namespace {

ops::SpatialMap empty_map(std::int64_t h, std::int64_t w) {
  ops::SpatialMap m;
  m.in_h = m.out_h = h;
  m.in_w = m.out_w = w;
  m.sources.assign(static_cast<std::size_t>(h * w * ops::SpatialMap::kTaps), -1);
  m.weights.assign(m.sources.size(), 0.0);
  return m;
}

void set_tap(ops::SpatialMap& m, std::int64_t q, int t, std::int64_t src, double weight) {
  m.sources[static_cast<std::size_t>(q * ops::SpatialMap::kTaps + t)] = static_cast<std::int32_t>(src);
  m.weights[static_cast<std::size_t>(q * ops::SpatialMap::kTaps + t)] = weight;
}

}  // namespace

ops::SpatialMap hflip_map(std::int64_t h, std::int64_t w) {
  auto m = empty_map(h, w);
  for (std::int64_t i = 0; i < h; ++i)
    for (std::int64_t j = 0; j < w; ++j) set_tap(m, i * w + j, 0, i * w + (w - 1 - j), 1.0);
  return m;
}

ops::SpatialMap shift_map(std::int64_t h, std::int64_t w, std::int64_t dx, std::int64_t dy) {
  // Zero-padded translation: output(i, j) = input(i - dy, j - dx).
  auto m = empty_map(h, w);
  for (std::int64_t i = 0; i < h; ++i)
    for (std::int64_t j = 0; j < w; ++j) {
      const auto si = i - dy, sj = j - dx;
      if (si >= 0 && si < h && sj >= 0 && sj < w) set_tap(m, i * w + j, 0, si * w + sj, 1.0);
    }
  return m;
}

ops::SpatialMap scale_map(std::int64_t h, std::int64_t w, double sx, double sy) {
  // Bilinear zoom about the image center; samples outside the input are zero.
  auto m = empty_map(h, w);
  const double cy = (static_cast<double>(h) - 1) / 2, cx = (static_cast<double>(w) - 1) / 2;
  for (std::int64_t i = 0; i < h; ++i)
    for (std::int64_t j = 0; j < w; ++j) {
      const double y = (static_cast<double>(i) - cy) / sy + cy, x = (static_cast<double>(j) - cx) / sx + cx;
      const auto y0 = static_cast<std::int64_t>(std::floor(y)), x0 = static_cast<std::int64_t>(std::floor(x));
      const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
      int t = 0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const auto yy = y0 + a, xx = x0 + b;
          const double wt = (a ? fy : 1 - fy) * (b ? fx : 1 - fx);
          if (yy >= 0 && yy < h && xx >= 0 && xx < w && wt != 0.0) set_tap(m, i * w + j, t, yy * w + xx, wt);
          ++t;
        }
    }
  return m;
}

Var apply_augment(Var x, const AugmentLog& log) {
  if (x.shape().size() != 4) throw ShapeError("augment needs an N x C x H x W batch");
  const auto h = x.shape()[2], w = x.shape()[3];
  for (const auto& d : log) {
    switch (d.op) {
      case AugOp::HFlip:
        if (d.flip) x = ops::spatial_resample(x, hflip_map(h, w));
        break;
      case AugOp::ShiftCrop:
        if (d.dx != 0 || d.dy != 0) x = ops::spatial_resample(x, shift_map(h, w, d.dx, d.dy));
        break;
      case AugOp::Scale:
        x = ops::spatial_resample(x, scale_map(h, w, d.sx, d.sy));
        break;
      case AugOp::Cutout: {
        if (d.size <= 0) break;
        const auto half = d.size / 2;
        std::vector<double> mask(static_cast<std::size_t>(shape_numel(x.shape())), 1.0);
        const auto planes = x.shape()[0] * x.shape()[1];
        for (std::int64_t p = 0; p < planes; ++p)
          for (std::int64_t i = std::max<std::int64_t>(0, d.cy - half); i < std::min(h, d.cy - half + d.size); ++i)
            for (std::int64_t j = std::max<std::int64_t>(0, d.cx - half); j < std::min(w, d.cx - half + d.size); ++j)
              mask[static_cast<std::size_t>((p * h + i) * w + j)] = 0.0;
        x = ops::mul(x, x.graph().constant(Tensor::from(x.shape(), mask).to(x.dtype())));
        break;
      }
    }
  }
  return x;
}

Tensor apply_augment(const Tensor& x, const AugmentLog& log) {
  Graph g;
  return apply_augment(g.constant(x), log).value();
}

}  // namespace elfdd::data

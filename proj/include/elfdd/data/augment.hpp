#pragma once

#include <string>
#include <vector>

#include "elfdd/tensor/graph.hpp"
#include "elfdd/tensor/ops.hpp"
#include "elfdd/tensor/prng.hpp"

namespace elfdd::data {

enum class AugOp { HFlip, ShiftCrop, Cutout, Scale };
std::string to_string(AugOp op);
AugOp parse_aug_op(const std::string& s);

struct AugmentConfig {
  std::vector<AugOp> ops;
  /// Single: one op chosen per call. Otherwise every op is applied in order.
  bool single = true;
  double max_shift = 0.125;  // fraction of the side, at most 0.25
  double scale_lo = 0.8, scale_hi = 1.2;
  double cutout = 0.5;  // side of the erased square as a fraction of the image side

  void validate() const;
  bool enabled() const { return !ops.empty(); }
};

/// One sampled transform. A batch-level draw is shared by every image in the
/// batch and, in siamese use, by the real and synthetic batches of a step.
struct AugmentDraw {
  AugOp op = AugOp::HFlip;
  bool flip = false;
  std::int64_t dx = 0, dy = 0;
  double sx = 1.0, sy = 1.0;
  std::int64_t cx = 0, cy = 0, size = 0;

  friend bool operator==(const AugmentDraw&, const AugmentDraw&) = default;
};

using AugmentLog = std::vector<AugmentDraw>;

AugmentLog sample_augment(const AugmentConfig& config, std::int64_t h, std::int64_t w, Rng& rng);
/// Differentiable application of a sampled transform to an N x C x H x W batch.
Var apply_augment(Var x, const AugmentLog& log);
Tensor apply_augment(const Tensor& x, const AugmentLog& log);

/// Maps used by apply_augment; exposed for tests.
ops::SpatialMap hflip_map(std::int64_t h, std::int64_t w);
ops::SpatialMap shift_map(std::int64_t h, std::int64_t w, std::int64_t dx, std::int64_t dy);
ops::SpatialMap scale_map(std::int64_t h, std::int64_t w, double sx, double sy);

}  // namespace elfdd::data

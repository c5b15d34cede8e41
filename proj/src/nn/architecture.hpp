#pragma once

// Internal block-level description of the model families.

#include <array>
#include <string>
#include <vector>

#include "elfdd/nn/model.hpp"

namespace elfdd::nn::detail {

struct ConvSpec {
  std::string name;
  std::int64_t in = 0, out = 0, k = 3, stride = 1, pad = 1;
  bool bias = true;
};

enum class Pool { None, Avg2, Max2 };

struct BlockSpec {
  enum class Kind { Plain, Residual, Head } kind = Kind::Plain;
  std::string name;
  // Plain: conv -> norm -> relu -> pool. Residual uses conv/norm as its first
  // branch layer and conv_b/norm_b as its second.
  ConvSpec conv;
  std::string norm;
  Pool pool = Pool::None;
  ConvSpec conv_b;
  std::string norm_b;
  bool has_shortcut = false;
  ConvSpec shortcut;
  std::string shortcut_norm;
  // Head.
  bool global_pool = false;
  std::int64_t in_features = 0;
  std::array<std::int64_t, 3> out_shape{};
  /// Layer names usable as split boundaries; `inner` ones sit inside a
  /// residual block and are rejected.
  std::vector<std::string> layer_names;
  std::vector<std::string> inner_layer_names;
};

/// Blocks 1..B followed by the head; index 0 of the vector is block 1.
std::vector<BlockSpec> architecture(const ModelConfig& config);

}  // namespace elfdd::nn::detail

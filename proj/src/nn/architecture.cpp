#include "architecture.hpp"

#include "elfdd/core/error.hpp"

namespace elfdd::nn::detail {

namespace {

using Shape3 = std::array<std::int64_t, 3>;

Shape3 conv_out(const Shape3& in, const ConvSpec& c) {
  return {c.out, (in[1] + 2 * c.pad - c.k) / c.stride + 1, (in[2] + 2 * c.pad - c.k) / c.stride + 1};
}

std::vector<BlockSpec> convnet(const ModelConfig& cfg) {
  std::vector<BlockSpec> blocks;
  Shape3 s{cfg.input_shape[0], cfg.input_shape[1], cfg.input_shape[2]};
  for (int d = 1; d <= cfg.depth; ++d) {
    BlockSpec b;
    b.name = "block" + std::to_string(d);
    b.conv = {b.name + ".conv", s[0], cfg.width, 3, 1, 1, true};
    b.norm = b.name + ".norm";
    b.pool = Pool::Avg2;
    s = conv_out(s, b.conv);
    if (s[1] < 2 || s[2] < 2) {
      throw ConfigError("ConvNet depth " + std::to_string(cfg.depth) + " pools a " +
                        std::to_string(s[1]) + "x" + std::to_string(s[2]) + " map at block " +
                        std::to_string(d) + "; input is too small");
    }
    s = {s[0], s[1] / 2, s[2] / 2};
    b.out_shape = s;
    b.layer_names = {b.name};
    blocks.push_back(b);
  }
  BlockSpec head;
  head.kind = BlockSpec::Kind::Head;
  head.name = "head";
  head.in_features = s[0] * s[1] * s[2];
  head.out_shape = {cfg.num_classes, 1, 1};
  blocks.push_back(head);
  return blocks;
}

std::vector<BlockSpec> resnet18(const ModelConfig& cfg) {
  std::vector<BlockSpec> blocks;
  Shape3 s{cfg.input_shape[0], cfg.input_shape[1], cfg.input_shape[2]};
  BlockSpec stem;
  stem.name = "conv1";
  stem.conv = {"conv1.conv", s[0], cfg.width, 3, 1, 1, false};
  stem.norm = "conv1.norm";
  s = conv_out(s, stem.conv);
  stem.out_shape = s;
  stem.layer_names = {"conv1"};
  blocks.push_back(stem);
  for (int stage = 2; stage <= 5; ++stage) {
    const std::int64_t out = cfg.width << (stage - 2);
    for (int i = 1; i <= 2; ++i) {
      BlockSpec b;
      b.kind = BlockSpec::Kind::Residual;
      b.name = "conv" + std::to_string(stage) + "_" + std::to_string(i);
      const std::int64_t stride = (stage > 2 && i == 1) ? 2 : 1;
      if (stride == 2 && (s[1] < 2 || s[2] < 2)) {
        throw ConfigError("MiniResNet: input too small for stage " + std::to_string(stage));
      }
      b.conv = {b.name + ".conv_a", s[0], out, 3, stride, 1, false};
      b.norm = b.name + ".norm_a";
      b.conv_b = {b.name + ".conv_b", out, out, 3, 1, 1, false};
      b.norm_b = b.name + ".norm_b";
      if (stride != 1 || s[0] != out) {
        b.has_shortcut = true;
        b.shortcut = {b.name + ".short_conv", s[0], out, 1, stride, 0, false};
        b.shortcut_norm = b.name + ".short_norm";
      }
      s = conv_out(s, b.conv);
      b.out_shape = s;
      b.layer_names = {b.name, b.name + "b"};
      b.inner_layer_names = {b.name + "a"};
      blocks.push_back(b);
    }
  }
  BlockSpec head;
  head.kind = BlockSpec::Kind::Head;
  head.name = "head";
  head.global_pool = true;
  head.in_features = s[0];
  head.out_shape = {cfg.num_classes, 1, 1};
  blocks.push_back(head);
  return blocks;
}

std::vector<BlockSpec> vgg11(const ModelConfig& cfg) {
  // VGG-11 layout: conv widths with a max pool after layers 1, 2, 4, 6, 8.
  const std::int64_t w = cfg.width;
  const std::int64_t widths[8] = {w, 2 * w, 4 * w, 4 * w, 8 * w, 8 * w, 8 * w, 8 * w};
  const bool pool_after[8] = {true, true, false, true, false, true, false, true};
  std::vector<BlockSpec> blocks;
  Shape3 s{cfg.input_shape[0], cfg.input_shape[1], cfg.input_shape[2]};
  for (int l = 0; l < 8; ++l) {
    BlockSpec b;
    b.name = "layer" + std::to_string(l + 1);
    b.conv = {b.name + ".conv", s[0], widths[l], 3, 1, 1, true};
    b.norm = b.name + ".norm";
    s = conv_out(s, b.conv);
    // Small inputs run out of resolution. A normalized layer on a 1x1 map
    // outputs a constant, so only the last pool may reach 1x1.
    const std::int64_t min_side = l == 7 ? 2 : 4;
    if (pool_after[l] && s[1] >= min_side && s[2] >= min_side) {
      b.pool = Pool::Max2;
      s = {s[0], s[1] / 2, s[2] / 2};
    }
    b.out_shape = s;
    b.layer_names = {b.name};
    blocks.push_back(b);
  }
  BlockSpec head;
  head.kind = BlockSpec::Kind::Head;
  head.name = "head";
  head.in_features = s[0] * s[1] * s[2];
  head.out_shape = {cfg.num_classes, 1, 1};
  blocks.push_back(head);
  return blocks;
}

}  // namespace

std::vector<BlockSpec> architecture(const ModelConfig& config) {
  config.validate();
  switch (config.family) {
    case Family::ConvNet: return convnet(config);
    case Family::MiniResNet: return resnet18(config);
    case Family::MiniVGG: return vgg11(config);
  }
  throw ConfigError("unknown model family");
}

}  // namespace elfdd::nn::detail

#include "elfdd/nn/model.hpp"

#include <cmath>

#include "architecture.hpp"
#include "elfdd/core/error.hpp"
#include "elfdd/tensor/ops.hpp"

namespace elfdd::nn {

using detail::BlockSpec;
using detail::ConvSpec;
using detail::Pool;

std::string to_string(Family f) {
  switch (f) {
    case Family::ConvNet: return "ConvNet";
    case Family::MiniResNet: return "MiniResNet";
    case Family::MiniVGG: return "MiniVGG";
  }
  return "?";
}

std::string to_string(Norm n) { return n == Norm::BatchNorm ? "BatchNorm" : "InstanceNorm"; }

Family parse_family(const std::string& s) {
  if (s == "ConvNet" || s == "convnet") return Family::ConvNet;
  if (s == "MiniResNet" || s == "resnet" || s == "ResNet18" || s == "resnet18") return Family::MiniResNet;
  if (s == "MiniVGG" || s == "vgg" || s == "VGG11" || s == "vgg11") return Family::MiniVGG;
  throw ConfigError("unknown model family '" + s + "'");
}

Norm parse_norm(const std::string& s) {
  if (s == "InstanceNorm" || s == "IN" || s == "in" || s == "instance") return Norm::InstanceNorm;
  if (s == "BatchNorm" || s == "BN" || s == "bn" || s == "batch") return Norm::BatchNorm;
  throw ConfigError("unknown norm '" + s + "'");
}

void ModelConfig::validate() const {
  if (width <= 0) throw ConfigError("model width must be positive, got " + std::to_string(width));
  if (num_classes <= 0) throw ConfigError("num_classes must be positive");
  for (auto d : input_shape) {
    if (d <= 0) throw ConfigError("input shape must be positive");
  }
  const auto c = static_cast<std::size_t>(input_shape[0]);
  if (input_mean.size() != c || input_std.size() != c) {
    throw ConfigError("input_mean/input_std need one entry per input channel");
  }
  for (double s : input_std) {
    if (!(s > 0)) throw ConfigError("input_std entries must be positive");
  }
  switch (family) {
    case Family::ConvNet:
      if (depth < 1 || depth > 5) {
        throw ConfigError("ConvNet depth must be in 1..5, got " + std::to_string(depth));
      }
      break;
    case Family::MiniResNet:
      if (depth != 18) throw ConfigError("MiniResNet supports depth 18 only, got " + std::to_string(depth));
      break;
    case Family::MiniVGG:
      if (depth != 11) throw ConfigError("MiniVGG supports depth 11 only, got " + std::to_string(depth));
      break;
  }
}

std::string ModelConfig::name() const {
  return to_string(family) + "-" + std::to_string(depth) + "-w" + std::to_string(width) + "-" +
         (norm == Norm::BatchNorm ? "BN" : "IN");
}

namespace {

void add_conv(std::vector<std::pair<std::string, Shape>>& out, const ConvSpec& c) {
  out.emplace_back(c.name + ".weight", Shape{c.out, c.in, c.k, c.k});
  if (c.bias) out.emplace_back(c.name + ".bias", Shape{c.out});
}

void add_norm(std::vector<std::pair<std::string, Shape>>& out, const std::string& name, std::int64_t c) {
  out.emplace_back(name + ".gamma", Shape{c});
  out.emplace_back(name + ".beta", Shape{c});
}

std::vector<std::pair<std::string, Shape>> block_params(const BlockSpec& b, const ModelConfig& cfg) {
  std::vector<std::pair<std::string, Shape>> out;
  switch (b.kind) {
    case BlockSpec::Kind::Plain:
      add_conv(out, b.conv);
      add_norm(out, b.norm, b.conv.out);
      break;
    case BlockSpec::Kind::Residual:
      add_conv(out, b.conv);
      add_norm(out, b.norm, b.conv.out);
      add_conv(out, b.conv_b);
      add_norm(out, b.norm_b, b.conv_b.out);
      if (b.has_shortcut) {
        add_conv(out, b.shortcut);
        add_norm(out, b.shortcut_norm, b.shortcut.out);
      }
      break;
    case BlockSpec::Kind::Head:
      out.emplace_back("head.weight", Shape{b.in_features, cfg.num_classes});
      out.emplace_back("head.bias", Shape{cfg.num_classes});
      break;
  }
  return out;
}

std::vector<std::string> norm_layers(const BlockSpec& b) {
  switch (b.kind) {
    case BlockSpec::Kind::Plain: return {b.norm};
    case BlockSpec::Kind::Residual:
      if (b.has_shortcut) return {b.norm, b.norm_b, b.shortcut_norm};
      return {b.norm, b.norm_b};
    case BlockSpec::Kind::Head: return {};
  }
  return {};
}

std::uint64_t name_tag(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::vector<std::pair<std::string, Shape>> param_shapes(const ModelConfig& config) {
  std::vector<std::pair<std::string, Shape>> out;
  for (const auto& b : detail::architecture(config)) {
    auto p = block_params(b, config);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::int64_t param_count(const ModelConfig& config) {
  std::int64_t n = 0;
  for (const auto& [name, shape] : param_shapes(config)) n += shape_numel(shape);
  return n;
}

int num_feature_blocks(const ModelConfig& config) {
  return static_cast<int>(detail::architecture(config).size()) - 1;
}

std::array<std::int64_t, 3> block_output_shape(const ModelConfig& config, int block_index) {
  const auto arch = detail::architecture(config);
  if (block_index == 0) return config.input_shape;
  if (block_index < 1 || block_index > static_cast<int>(arch.size())) {
    throw ValueError("block index " + std::to_string(block_index) + " out of range 0.." +
                     std::to_string(arch.size()));
  }
  return arch[static_cast<std::size_t>(block_index - 1)].out_shape;
}

ModelState build_model(const ModelConfig& config, PrngState seed) {
  ModelState m;
  m.config = config;
  const auto arch = detail::architecture(config);
  for (const auto& b : arch) {
    for (const auto& [name, shape] : block_params(b, config)) {
      Tensor t;
      if (name.ends_with(".gamma")) {
        t = Tensor::full(shape, 1.0, config.dtype);
      } else if (name.ends_with(".beta")) {
        t = Tensor::zeros(shape, config.dtype);
      } else {
        // Fan-in: I*k*k for conv weights, D for the head, the matching weight's fan-in for biases.
        const std::string stem = name.substr(0, name.rfind('.'));
        Shape wshape;
        for (const auto& [n2, s2] : block_params(b, config)) {
          if (n2 == stem + ".weight") wshape = s2;
        }
        const std::int64_t fan_in =
            wshape.size() == 4 ? wshape[1] * wshape[2] * wshape[3] : wshape[0];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Rng rng(prng_split(seed, name_tag(name)));
        t = random_uniform(shape, rng, -bound, bound, config.dtype);
      }
      m.params.emplace(name, std::move(t));
    }
    if (config.norm == Norm::BatchNorm) {
      for (const auto& layer : norm_layers(b)) {
        const auto c = m.params.at(layer + ".gamma").numel();
        m.bn_stats[layer] = {Tensor::zeros({c}, config.dtype), Tensor::full({c}, 1.0, config.dtype)};
      }
    }
  }
  return m;
}

void validate_split(const ModelConfig& config, SplitPoint sp) {
  const int n = num_feature_blocks(config);
  if (sp.block_index < 1 || sp.block_index > n) {
    throw ConfigError("split index " + std::to_string(sp.block_index) + " out of range 1.." +
                      std::to_string(n) + " for " + config.name());
  }
}

SplitPoint resolve_split(const ModelConfig& config, const std::string& name) {
  const auto arch = detail::architecture(config);
  const int n = static_cast<int>(arch.size()) - 1;
  if (name == "conv5_2-analog") {
    if (config.family != Family::MiniResNet) throw ConfigError("conv5_2-analog applies to MiniResNet only");
    return resolve_split(config, "conv5_1");
  }
  if (name.starts_with("block")) {
    try {
      SplitPoint sp{std::stoi(name.substr(5))};
      validate_split(config, sp);
      return sp;
    } catch (const std::invalid_argument&) {
    }
  }
  for (int i = 0; i < n; ++i) {
    const auto& b = arch[static_cast<std::size_t>(i)];
    for (const auto& inner : b.inner_layer_names) {
      if (inner == name) {
        throw ConfigError("split '" + name + "' falls inside residual block " + b.name +
                          "; splits are allowed only at block boundaries");
      }
    }
    for (const auto& l : b.layer_names) {
      if (l == name) return SplitPoint{i + 1};
    }
  }
  throw ConfigError("unknown split point '" + name + "' for " + config.name());
}

SplitPoint default_split(const ModelConfig& config) {
  switch (config.family) {
    case Family::MiniResNet: return resolve_split(config, "conv5_2-analog");
    case Family::MiniVGG: return resolve_split(config, "layer5");
    case Family::ConvNet: return SplitPoint{config.depth};
  }
  return SplitPoint{1};
}

Var Binding::operator()(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ValueError("parameter '" + name + "' is not bound");
  return it->second;
}

Binding bind(Graph& g, const ModelState& model, bool trainable, const std::string& prefix) {
  Binding b;
  for (const auto& [name, t] : model.params) {
    b.set(name, trainable ? g.leaf(t, prefix + name) : g.constant(t));
  }
  return b;
}

namespace {

Var conv(Graph&, const Binding& p, Var x, const ConvSpec& c) {
  Var y = ops::conv2d(x, p(c.name + ".weight"), c.stride, c.pad);
  if (c.bias) y = ops::bias_add(y, p(c.name + ".bias"));
  return y;
}

Var norm(ModelState& m, const Binding& p, Var x, const std::string& layer, Mode mode) {
  Var gamma = p(layer + ".gamma"), beta = p(layer + ".beta");
  if (m.config.norm == Norm::InstanceNorm) return ops::instance_norm(x, gamma, beta, m.eps);
  auto& stats = m.bn_stats.at(layer);
  if (mode == Mode::Eval) return ops::batch_norm_eval(x, gamma, beta, stats.mean, stats.var, m.eps);
  ops::BatchMoments moments;
  Var y = ops::batch_norm_train(x, gamma, beta, m.eps, &moments);
  const double k = m.bn_momentum;
  stats.mean = add(scale(stats.mean, 1.0 - k), scale(moments.mean, k));
  stats.var = add(scale(stats.var, 1.0 - k), scale(moments.var, k));
  return y;
}

Var standardize(Graph& g, const ModelConfig& cfg, Var x) {
  // A diagonal 1x1 convolution plus bias: (x - mean) / std per channel.
  const auto c = cfg.input_shape[0];
  std::vector<double> w(static_cast<std::size_t>(c * c), 0.0), b(static_cast<std::size_t>(c));
  for (std::int64_t i = 0; i < c; ++i) {
    w[static_cast<std::size_t>(i * c + i)] = 1.0 / cfg.input_std[static_cast<std::size_t>(i)];
    b[static_cast<std::size_t>(i)] = -cfg.input_mean[static_cast<std::size_t>(i)] / cfg.input_std[static_cast<std::size_t>(i)];
  }
  Var kw = g.constant(Tensor::from({c, c, 1, 1}, w).to(cfg.dtype));
  Var kb = g.constant(Tensor::from({c}, b).to(cfg.dtype));
  return ops::bias_add(ops::conv2d(x, kw, 1, 0), kb);
}

Var run_block(Graph& g, ModelState& m, const Binding& p, Var x, const BlockSpec& b, Mode mode) {
  switch (b.kind) {
    case BlockSpec::Kind::Plain: {
      Var y = ops::relu(norm(m, p, conv(g, p, x, b.conv), b.norm, mode));
      if (b.pool == Pool::Avg2) y = ops::avg_pool2d(y, 2, 2);
      if (b.pool == Pool::Max2) y = ops::max_pool2d(y, 2, 2);
      return y;
    }
    case BlockSpec::Kind::Residual: {
      Var y = ops::relu(norm(m, p, conv(g, p, x, b.conv), b.norm, mode));
      y = norm(m, p, conv(g, p, y, b.conv_b), b.norm_b, mode);
      Var s = b.has_shortcut ? norm(m, p, conv(g, p, x, b.shortcut), b.shortcut_norm, mode) : x;
      return ops::relu(ops::add(y, s));
    }
    case BlockSpec::Kind::Head: {
      Var h = b.global_pool ? ops::global_avg_pool(x) : ops::flatten(x);
      return ops::linear(h, p("head.weight"), p("head.bias"));
    }
  }
  return x;
}

void check_input(const ModelConfig& cfg, const Shape& shape, int begin) {
  const auto want = block_output_shape(cfg, begin);
  if (shape.size() != 4 || shape[1] != want[0] || shape[2] != want[1] || shape[3] != want[2]) {
    throw ShapeError("model " + cfg.name() + " expects N x " + std::to_string(want[0]) + " x " +
                     std::to_string(want[1]) + " x " + std::to_string(want[2]) +
                     (begin == 0 ? std::string(" input") : " input at block " + std::to_string(begin)) +
                     ", got " + shape_string(shape));
  }
}

}  // namespace

Var run_blocks(Graph& g, ModelState& model, const Binding& params, Var x, Mode mode, int begin, int end) {
  const auto arch = detail::architecture(model.config);
  const int total = static_cast<int>(arch.size());
  if (begin < 0 || end > total || begin > end) {
    throw ValueError("block range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + model.config.name());
  }
  check_input(model.config, x.shape(), begin);
  if (x.dtype() != model.config.dtype) throw ShapeError("input dtype does not match model dtype");
  model.mode = mode;
  if (begin == 0) x = standardize(g, model.config, x);
  for (int i = begin; i < end; ++i) {
    const auto& b = arch[static_cast<std::size_t>(i)];
    x = run_block(g, model, params, x, b, mode);
    if (!all_finite(x.value())) {
      throw NumericError("non-finite activation after block " + std::to_string(i + 1) + " (" + b.name +
                         ") of " + model.config.name());
    }
  }
  return x;
}

Var forward(Graph& g, ModelState& model, const Binding& params, Var x, Mode mode) {
  return run_blocks(g, model, params, x, mode, 0, num_feature_blocks(model.config) + 1);
}

Tensor forward(ModelState& model, const Tensor& batch, Mode mode) {
  Graph g;
  Binding p = bind(g, model, false);
  return forward(g, model, p, g.constant(batch), mode).value();
}

Tensor feature_tap(ModelState& model, const Tensor& batch, int block_index, Mode mode) {
  const int n = num_feature_blocks(model.config);
  if (block_index < 1 || block_index > n) {
    throw ValueError("feature tap index " + std::to_string(block_index) + " out of range 1.." +
                     std::to_string(n));
  }
  Graph g;
  Binding p = bind(g, model, false);
  return run_blocks(g, model, p, g.constant(batch), mode, 0, block_index).value();
}

Var Section::run(Graph& g, const Binding& params, Var x, Mode mode) const {
  return run_blocks(g, *model_, params, x, mode, begin_, end_);
}

Tensor Section::run(const Tensor& x, Mode mode) const {
  Graph g;
  Binding p = bind(g, *model_, false);
  return run(g, p, g.constant(x), mode).value();
}

std::vector<std::string> Section::param_names() const {
  const auto arch = detail::architecture(model_->config);
  std::vector<std::string> names;
  for (int i = begin_; i < end_; ++i) {
    for (const auto& [name, shape] : block_params(arch[static_cast<std::size_t>(i)], model_->config)) {
      names.push_back(name);
    }
  }
  return names;
}

std::pair<Section, Section> split_model(ModelState& model, SplitPoint sp) {
  validate_split(model.config, sp);
  return {Section(model, 0, sp.block_index),
          Section(model, sp.block_index, num_feature_blocks(model.config) + 1)};
}

}  // namespace elfdd::nn

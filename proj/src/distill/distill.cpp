#include "elfdd/distill/distill.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "elfdd/core/error.hpp"
#include "elfdd/nn/serialize.hpp"
#include "elfdd/tensor/checkpoint.hpp"
#include "elfdd/tensor/ops.hpp"

namespace elfdd::distill {

using data::LabeledDataset;
using data::SyntheticDataset;
using nlohmann::json;

std::string to_string(Method m) { return m == Method::DM ? "dm" : "gm"; }

Method parse_method(const std::string& s) {
  if (s == "dm" || s == "DM") return Method::DM;
  if (s == "gm" || s == "GM" || s == "GradMatch" || s == "gradmatch") return Method::GradMatch;
  throw ConfigError("unknown distillation method '" + s + "' (expected dm or gm)");
}

void DistillConfig::validate() const {
  model.validate();
  if (ipc < 1) throw ConfigError("ipc must be positive");
  if (iterations < 0) throw ConfigError("iterations must be non-negative");
  if (!(lr_img > 0)) throw ConfigError("lr_img must be positive");
  if (img_momentum < 0 || img_momentum >= 1) throw ConfigError("img_momentum must be in [0, 1)");
  if (real_per_class < 1) throw ConfigError("real_per_class must be positive");
  if (method == Method::DM && models_per_iteration < 1) throw ConfigError("models_per_iteration must be positive");
  if (method == Method::GradMatch) {
    if (sweeps_per_model < 1) throw ConfigError("sweeps_per_model must be positive");
    if (inner_steps < 0) throw ConfigError("inner_steps must be non-negative");
    if (!(inner_lr > 0)) throw ConfigError("inner_lr must be positive");
    if (!(fd_scale > 0)) throw ConfigError("fd_scale must be positive");
  }
  augment.validate();
}

json config_to_json(const DistillConfig& c) {
  json ops = json::array();
  for (auto op : c.augment.ops) ops.push_back(data::to_string(op));
  return {{"method", to_string(c.method)},
          {"model", nn::config_to_json(c.model)},
          {"ipc", c.ipc},
          {"init", data::to_string(c.init)},
          {"iterations", c.iterations},
          {"lr_img", c.lr_img},
          {"img_momentum", c.img_momentum},
          {"real_per_class", c.real_per_class},
          {"models_per_iteration", c.models_per_iteration},
          {"sweeps_per_model", c.sweeps_per_model},
          {"inner_steps", c.inner_steps},
          {"inner_lr", c.inner_lr},
          {"fd_scale", c.fd_scale},
          {"augment", {{"ops", ops},
                       {"single", c.augment.single},
                       {"max_shift", c.augment.max_shift},
                       {"scale_lo", c.augment.scale_lo},
                       {"scale_hi", c.augment.scale_hi},
                       {"cutout", c.augment.cutout}}},
          {"seed", c.seed}};
}

namespace {

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double norm2(const TensorMap& m) {
  double s = 0;
  for (const auto& [name, t] : m)
    for (double v : t.to_vector()) s += v * v;
  return s;
}

// Mixed-precision safe dot products and norms over a whole tensor.
struct Dots {
  double ab = 0, aa = 0, bb = 0;
};

Dots dots(const Tensor& a, const Tensor& b) {
  Dots d;
  const auto av = a.to_vector(), bv = b.to_vector();
  for (std::size_t i = 0; i < av.size(); ++i) {
    d.ab += av[i] * bv[i];
    d.aa += av[i] * av[i];
    d.bb += bv[i] * bv[i];
  }
  return d;
}

void require_same_keys(const TensorMap& a, const TensorMap& b) {
  if (a.size() != b.size()) throw ValueError("gradient sets differ in size");
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) throw ValueError("gradient sets differ: '" + ia->first + "' vs '" + ib->first + "'");
    if (ia->second.shape() != ib->second.shape()) throw ShapeError("gradient shapes differ for " + ia->first);
  }
}

Tensor input_gradient(nn::ModelState& model, const TensorMap& params, const Tensor& x, std::span<const int> labels) {
  const auto saved = model.bn_stats;
  Graph g;
  nn::Binding p;
  for (const auto& [name, t] : params) p.set(name, g.constant(t));
  Var xv = g.leaf(x, "x");
  Var loss = ops::softmax_cross_entropy(nn::forward(g, model, p, xv, nn::Mode::Train), labels);
  auto grads = g.backward(loss);
  model.bn_stats = saved;
  return grads["x"];
}

class ImageOptimizer {
 public:
  ImageOptimizer(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
  Tensor step(const Tensor& images, const Tensor& grad) {
    velocity_ = velocity_.defined() ? add(scale(velocity_, momentum_), grad) : grad;
    return data::clamp01(sub(images, scale(velocity_, lr_)));
  }

 private:
  double lr_, momentum_;
  Tensor velocity_;
};

// Rows [begin, end) of `grad` added into a zero tensor shaped like `full`.
Tensor place_rows(const Tensor& full, std::int64_t begin, const Tensor& part) {
  auto v = full.to_vector();
  const auto p = part.to_vector();
  const std::int64_t stride = full.numel() / full.dim(0);
  for (std::size_t i = 0; i < p.size(); ++i) v[static_cast<std::size_t>(begin * stride) + i] += p[i];
  return Tensor::from(full.shape(), v).to(full.dtype());
}

Tensor slice(const Tensor& t, std::int64_t b, std::int64_t e) {
  Graph g;
  return ops::slice_rows(g.constant(t), b, e).value();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SyntheticDataset initial_syn(const LabeledDataset& real, const DistillConfig& config) {
  config.validate();
  const auto shape = real.image_shape();
  if (shape != config.model.input_shape) throw ConfigError("distillation model input shape does not match the data");
  if (config.model.num_classes != real.class_count) throw ConfigError("distillation model class count mismatch");
  auto syn = data::init_synthetic(real, config.ipc, config.init, prng_split({config.seed, 0}, 1));
  syn.images = syn.images.to(config.model.dtype);
  syn.method = to_string(config.method);
  syn.config_hash = config.hash();
  return syn;
}

}  // namespace

std::string DistillConfig::hash() const { return hex64(fnv(config_to_json(*this).dump())); }

Var dm_loss(Graph& g, nn::ModelState& model, const nn::Binding& params, const std::vector<Var>& real_per_class,
            const std::vector<Var>& syn_per_class) {
  if (real_per_class.size() != syn_per_class.size()) {
    throw ValueError("dm_loss: " + std::to_string(real_per_class.size()) + " real classes vs " +
                     std::to_string(syn_per_class.size()) + " synthetic classes");
  }
  if (real_per_class.empty()) throw ValueError("dm_loss: no classes");
  const int last = nn::num_feature_blocks(model.config);
  Var total;
  for (std::size_t c = 0; c < real_per_class.size(); ++c) {
    if (!real_per_class[c].valid() || !syn_per_class[c].valid()) {
      throw ValueError("dm_loss: class " + std::to_string(c) + " is present on one side only");
    }
    auto embed = [&](Var x) {
      return ops::mean_rows(ops::flatten(nn::run_blocks(g, model, params, x, nn::Mode::Eval, 0, last)));
    };
    Var d = ops::sum(ops::square(ops::sub(embed(real_per_class[c]), embed(syn_per_class[c]))));
    total = total.valid() ? ops::add(total, d) : d;
  }
  return total;
}

double layerwise_cosine_distance(const TensorMap& a, const TensorMap& b) {
  require_same_keys(a, b);
  double total = 0;
  for (const auto& [name, ta] : a) {
    const auto d = dots(ta, b.at(name));
    if (d.aa == 0.0 || d.bb == 0.0) {
      total += 1.0;
    } else {
      total += 1.0 - d.ab / std::sqrt(d.aa * d.bb);
    }
  }
  return total;
}

TensorMap layerwise_cosine_distance_grad(const TensorMap& a, const TensorMap& b) {
  require_same_keys(a, b);
  TensorMap out;
  for (const auto& [name, ta] : a) {
    const Tensor& tb = b.at(name);
    const auto d = dots(ta, tb);
    if (d.aa == 0.0 || d.bb == 0.0) {
      out[name] = Tensor::zeros(tb.shape(), tb.dtype());
      continue;
    }
    // d/db [1 - a.b / (|a||b|)] = -a / (|a||b|) + (a.b) b / (|a| |b|^3)
    const double na = std::sqrt(d.aa), nb = std::sqrt(d.bb);
    out[name] = add(scale(ta, -1.0 / (na * nb)), scale(tb, d.ab / (na * nb * nb * nb))).to(tb.dtype());
  }
  return out;
}

TensorMap param_gradients(nn::ModelState& model, const Tensor& images, std::span<const int> labels) {
  const auto saved = model.bn_stats;
  Graph g;
  auto p = nn::bind(g, model, true);
  Var loss = ops::softmax_cross_entropy(nn::forward(g, model, p, g.constant(images), nn::Mode::Train), labels);
  if (!all_finite(loss.value())) throw NumericError("non-finite classification loss in gradient matching");
  auto grads = g.backward(loss);
  model.bn_stats = saved;
  TensorMap out;
  for (const auto& [name, t] : grads.named()) {
    // Every conv bias feeds a normalization, which cancels it: the exact
    // gradient is zero and the computed one is rounding noise.
    if (!name.ends_with(".conv.bias")) out.emplace(name, t);
  }
  for (const auto& [name, t] : out) {
    if (!all_finite(t)) throw NumericError("non-finite gradient for parameter " + name);
  }
  return out;
}

GradMatchResult grad_match_loss(nn::ModelState& model, const Tensor& real, std::span<const int> real_labels,
                                const Tensor& syn, std::span<const int> syn_labels, double fd_scale) {
  if (real.dim(0) == 0 || syn.dim(0) == 0) throw ValueError("grad_match_loss: empty batch");
  const auto g_real = param_gradients(model, real, real_labels);
  const auto g_syn = param_gradients(model, syn, syn_labels);
  GradMatchResult r;
  r.loss = layerwise_cosine_distance(g_real, g_syn);
  const auto v = layerwise_cosine_distance_grad(g_real, g_syn);
  const double vn = std::sqrt(norm2(v));
  if (vn == 0.0) {
    r.grad_syn = Tensor::zeros(syn.shape(), syn.dtype());
    return r;
  }
  const double eps = fd_scale * std::sqrt(norm2(model.params)) / vn;
  TensorMap plus = model.params, minus = model.params;
  for (const auto& [name, dir] : v) {
    plus[name] = add(plus[name], scale(dir, eps));
    minus[name] = sub(minus[name], scale(dir, eps));
  }
  const Tensor gp = input_gradient(model, plus, syn, syn_labels);
  const Tensor gm = input_gradient(model, minus, syn, syn_labels);
  r.grad_syn = scale(sub(gp, gm), 1.0 / (2.0 * eps));
  return r;
}

DistillResult distill_dm(const LabeledDataset& real, const DistillConfig& config) {
  if (config.method != Method::DM) throw ConfigError("distill_dm needs method dm");
  DistillResult out;
  out.syn = initial_syn(real, config);
  auto& syn = out.syn;
  const Tensor real_images = real.images.to(config.model.dtype);
  LabeledDataset real_cast = real;
  real_cast.images = real_images;
  ImageOptimizer opt(config.lr_img, config.img_momentum);
  PrngState batch_state = prng_split({config.seed, 0}, 2);
  Rng aug_rng(prng_split({config.seed, 0}, 3));
  const auto t0 = std::chrono::steady_clock::now();
  const auto shape = real.image_shape();
  for (int it = 0; it < config.iterations; ++it) {
    Tensor grad = Tensor::zeros(syn.images.shape(), syn.images.dtype());
    double loss = 0;
    for (int m = 0; m < config.models_per_iteration; ++m) {
      auto model = nn::build_model(
          config.model, prng_split({config.seed, 0}, 1000 + static_cast<std::uint64_t>(it) * 64 + m));
      Graph g;
      auto params = nn::bind(g, model, false);
      Var leaf = g.leaf(syn.images, "syn");
      std::vector<Var> rv, sv;
      for (int k = 0; k < syn.class_count; ++k) {
        auto [batch, next] = data::sample_class(real_cast, k, config.real_per_class, batch_state);
        batch_state = next;
        Var xr = g.constant(batch.images);
        Var xs = ops::slice_rows(leaf, syn.class_begin(k), syn.class_begin(k + 1));
        if (config.augment.enabled()) {
          // One draw per class, shared by both sides.
          auto draw = data::sample_augment(config.augment, shape[1], shape[2], aug_rng);
          xr = data::apply_augment(xr, draw);
          xs = data::apply_augment(xs, draw);
          out.augment_log.push_back({it, k, draw, draw});
        }
        rv.push_back(xr);
        sv.push_back(xs);
      }
      Var l = dm_loss(g, model, params, rv, sv);
      loss += l.value().item();
      grad = add(grad, g.backward(l)["syn"]);
    }
    syn.images = opt.step(syn.images, grad);
    out.trace.push_back({it, loss / config.models_per_iteration, seconds_since(t0)});
  }
  return out;
}

DistillResult distill_gm(const LabeledDataset& real, const DistillConfig& config) {
  if (config.method != Method::GradMatch) throw ConfigError("distill_gm needs method gm");
  DistillResult out;
  out.syn = initial_syn(real, config);
  auto& syn = out.syn;
  LabeledDataset real_cast = real;
  real_cast.images = real.images.to(config.model.dtype);
  ImageOptimizer opt(config.lr_img, config.img_momentum);
  PrngState batch_state = prng_split({config.seed, 0}, 2);
  Rng aug_rng(prng_split({config.seed, 0}, 3));
  const auto t0 = std::chrono::steady_clock::now();
  const auto shape = real.image_shape();
  nn::ModelState model;
  for (int it = 0; it < config.iterations; ++it) {
    const int phase = it % config.sweeps_per_model;
    if (phase == 0) {
      model = nn::build_model(config.model, prng_split({config.seed, 0}, 2000 + static_cast<std::uint64_t>(it)));
    }
    Tensor grad = Tensor::zeros(syn.images.shape(), syn.images.dtype());
    double loss = 0;
    for (int k = 0; k < syn.class_count; ++k) {
      auto [batch, next] = data::sample_class(real_cast, k, config.real_per_class, batch_state);
      batch_state = next;
      Tensor xr = batch.images;
      Tensor xs = slice(syn.images, syn.class_begin(k), syn.class_begin(k + 1));
      data::AugmentLog draw;
      if (config.augment.enabled()) {
        draw = data::sample_augment(config.augment, shape[1], shape[2], aug_rng);
        xr = data::apply_augment(xr, draw);
        xs = data::apply_augment(xs, draw);
        out.augment_log.push_back({it, k, draw, draw});
      }
      std::vector<int> ys(static_cast<std::size_t>(syn.ipc), k);
      auto r = grad_match_loss(model, xr, batch.labels, xs, ys, config.fd_scale);
      loss += r.loss;
      Tensor g_class = r.grad_syn;
      if (!draw.empty()) {
        // Pull the gradient back through the (linear) augmentation.
        Graph g;
        Var leaf = g.leaf(slice(syn.images, syn.class_begin(k), syn.class_begin(k + 1)), "x");
        Var y = data::apply_augment(leaf, draw);
        g_class = g.backward(ops::sum(ops::mul(y, g.constant(r.grad_syn))))["x"];
      }
      grad = place_rows(grad, syn.class_begin(k), g_class);
    }
    syn.images = opt.step(syn.images, grad);
    out.trace.push_back({it, loss, seconds_since(t0)});
    if (phase == config.sweeps_per_model - 1) continue;  // the model is re-drawn next
    for (int s = 0; s < config.inner_steps; ++s) {
      auto grads = param_gradients(model, syn.images, syn.labels);
      // Keep BN running statistics moving as a normal training step would.
      nn::forward(model, syn.images, nn::Mode::Train);
      TensorMap velocity;
      sgd_momentum_step(model.params, grads, velocity, config.inner_lr, 0.0);
    }
  }
  return out;
}

DistillResult run_distillation(const LabeledDataset& real, const DistillConfig& config) {
  return config.method == Method::DM ? distill_dm(real, config) : distill_gm(real, config);
}

void save_synthetic(const std::filesystem::path& path, const SyntheticDataset& syn) {
  std::vector<double> labels(syn.labels.begin(), syn.labels.end());
  NamedTensors ts{{"images", syn.images.to(DType::F32)},
                  {"labels", Tensor::from({static_cast<std::int64_t>(labels.size())}, labels).to(DType::F32)},
                  {"ipc", Tensor::scalar(syn.ipc)},
                  {"class_count", Tensor::scalar(syn.class_count)}};
  // Method as its enum index; absent for sets of unknown origin.
  if (!syn.method.empty()) ts.push_back({"method", Tensor::scalar(static_cast<int>(parse_method(syn.method)))});
  save_checkpoint(path, ts);
}

SyntheticDataset load_synthetic(const std::filesystem::path& path) {
  SyntheticDataset s;
  for (const auto& [name, t] : load_checkpoint(path)) {
    if (name == "images") s.images = t;
    if (name == "labels")
      for (double v : t.to_vector()) s.labels.push_back(static_cast<int>(v));
    if (name == "ipc") s.ipc = static_cast<int>(t.item());
    if (name == "class_count") s.class_count = static_cast<int>(t.item());
    if (name == "method") s.method = to_string(static_cast<Method>(static_cast<int>(t.item())));
  }
  if (!s.images.defined() || s.ipc <= 0 || s.class_count <= 0 ||
      s.size() != static_cast<std::int64_t>(s.ipc) * s.class_count) {
    throw FormatError(path.string() + " is not a synthetic dataset file");
  }
  return s;
}

void write_outputs(const std::filesystem::path& dir, const DistillResult& result, const DistillConfig& config,
                   const std::string& real_hash) {
  std::filesystem::create_directories(dir);
  const auto& syn = result.syn;
  save_synthetic(dir / "synthetic.elft", syn);
  data::write_png_grid(dir / "synthetic.png", syn.images, syn.class_count, syn.ipc);
  json trace = json::array();
  for (const auto& e : result.trace) trace.push_back({{"iteration", e.iteration}, {"loss", e.loss}, {"seconds", e.seconds}});
  {
    std::ofstream out(dir / "trace.json");
    out << json{{"method", to_string(config.method)}, {"trace", trace}}.dump(1) << "\n";
  }
  json manifest = {{"config", config_to_json(config)},
                   {"config_hash", config.hash()},
                   {"real_hash", real_hash},
                   {"synthetic_hash", hex64(hash_tensor(syn.images.to(DType::F32)))},
                   {"label_hash", hex64(syn.label_hash())},
                   {"files", {"synthetic.elft", "synthetic.png", "trace.json"}}};
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
}

}  // namespace elfdd::distill

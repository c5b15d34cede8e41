#include "elfdd/nn/train.hpp"

#include <algorithm>

#include "elfdd/core/error.hpp"
#include "elfdd/tensor/ops.hpp"

namespace elfdd::nn {

namespace {

Tensor rows_of(const Tensor& t, std::int64_t begin, std::int64_t end) {
  Graph g;
  return ops::slice_rows(g.constant(t), begin, end).value();
}

Tensor gather(const Tensor& t, const std::vector<std::int64_t>& rows) {
  const std::int64_t stride = t.numel() / t.dim(0);
  Shape shape = t.shape();
  shape[0] = static_cast<std::int64_t>(rows.size());
  return dispatch(t.dtype(), [&]<class T>() {
    auto src = t.data<T>();
    std::vector<T> out(rows.size() * static_cast<std::size_t>(stride));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy_n(src.begin() + rows[i] * stride, stride, out.begin() + static_cast<std::ptrdiff_t>(i) * stride);
    }
    return Tensor::from(shape, std::move(out));
  });
}

}  // namespace

void add_weight_decay(TensorMap& grads, const TensorMap& params, double weight_decay) {
  if (weight_decay == 0.0) return;
  for (auto& [name, g] : grads) g = add(g, scale(params.at(name), weight_decay));
}

std::vector<double> train_classifier(ModelState& model, const Tensor& images, std::span<const int> labels,
                                     const TrainOptions& options, const BatchTransform& transform,
                                     const EpochHook& hook) {
  const std::int64_t n = images.dim(0);
  if (static_cast<std::int64_t>(labels.size()) != n) throw ShapeError("train_classifier: images/labels mismatch");
  if (options.epochs < 0 || options.batch_size < 1) throw ConfigError("bad training options");
  Rng rng(options.seed);
  Rng aug_rng = rng.split(0xa4a4);
  SgdMomentum opt{options.lr, options.momentum, {}};
  std::vector<double> history;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    if (options.decay_at_half && epoch == options.epochs / 2 && epoch > 0) opt.lr = options.lr * 0.1;
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(std::span<std::int64_t>(perm));
    double total = 0.0;
    for (std::int64_t b = 0; b < n; b += options.batch_size) {
      const auto e = std::min(n, b + options.batch_size);
      std::vector<std::int64_t> rows(perm.begin() + b, perm.begin() + e);
      std::vector<int> y;
      for (auto r : rows) y.push_back(labels[static_cast<std::size_t>(r)]);
      Graph g;
      Binding p = bind(g, model, true);
      Var x = g.constant(gather(images, rows));
      if (transform) x = transform(x, aug_rng);
      Var loss = ops::softmax_cross_entropy(forward(g, model, p, x, Mode::Train), y);
      total += loss.value().item() * static_cast<double>(e - b);
      auto grads = g.backward(loss);
      TensorMap gm(grads.named().begin(), grads.named().end());
      add_weight_decay(gm, model.params, options.weight_decay);
      opt.step(model.params, gm);
    }
    history.push_back(total / static_cast<double>(n));
    if (hook) hook(epoch, history.back());
  }
  return history;
}

Tensor predict(ModelState& model, const Tensor& images, std::int64_t chunk) {
  const std::int64_t n = images.dim(0);
  std::vector<double> out;
  for (std::int64_t b = 0; b < n; b += chunk) {
    auto logits = forward(model, rows_of(images, b, std::min(n, b + chunk)), Mode::Eval);
    auto v = logits.to_vector();
    out.insert(out.end(), v.begin(), v.end());
  }
  return Tensor::from({n, static_cast<std::int64_t>(model.config.num_classes)}, out);
}

std::vector<int> argmax_rows(const Tensor& logits) {
  const auto n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out;
  for (std::int64_t i = 0; i < n; ++i) {
    int best = 0;
    for (std::int64_t j = 1; j < k; ++j) {
      if (logits.flat(i * k + j) > logits.flat(i * k + best)) best = static_cast<int>(j);
    }
    out.push_back(best);
  }
  return out;
}

double accuracy(ModelState& model, const Tensor& images, std::span<const int> labels, std::int64_t chunk) {
  if (static_cast<std::int64_t>(labels.size()) != images.dim(0)) throw ShapeError("accuracy: images/labels mismatch");
  if (labels.empty()) return 0.0;
  const auto pred = argmax_rows(predict(model, images, chunk));
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace elfdd::nn

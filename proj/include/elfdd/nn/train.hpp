#pragma once

#include <functional>
#include <span>
#include <vector>

#include "elfdd/nn/model.hpp"

namespace elfdd::nn {

struct TrainOptions {
  int epochs = 30;
  std::int64_t batch_size = 256;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  /// Multiply the learning rate by 0.1 after half of the epochs.
  bool decay_at_half = true;
  PrngState seed{0, 0};
};

/// Applied to every training mini-batch before the forward pass, e.g. a
/// differentiable augmentation. The Rng is private to the trainer.
using BatchTransform = std::function<Var(Var, Rng&)>;
/// Called after each epoch with (epoch, mean training loss).
using EpochHook = std::function<void(int, double)>;

/// Mini-batch SGD on cross-entropy. Returns per-epoch mean loss.
std::vector<double> train_classifier(ModelState& model, const Tensor& images, std::span<const int> labels,
                                     const TrainOptions& options, const BatchTransform& transform = {},
                                     const EpochHook& hook = {});

/// Adds weight_decay * p to each gradient of `grads` in place.
void add_weight_decay(TensorMap& grads, const TensorMap& params, double weight_decay);

/// Eval-mode logits in chunks of `chunk` rows.
Tensor predict(ModelState& model, const Tensor& images, std::int64_t chunk = 500);
/// Row-wise argmax; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Tensor& logits);
/// Fraction of rows whose argmax equals the label.
double accuracy(ModelState& model, const Tensor& images, std::span<const int> labels, std::int64_t chunk = 500);

}  // namespace elfdd::nn

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "elfdd/tensor/graph.hpp"

// Differentiable operations on Graph variables. All inputs of one op must
// share a dtype; the output carries that dtype.
namespace elfdd::ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var square(Var a);
Var abs(Var a);
Var relu(Var a);

/// Sum of all elements, shape {1}.
Var sum(Var a);
/// Mean of all elements, shape {1}.
Var mean(Var a);
/// Mean over axis 0 of an N x D matrix, shape {D}.
Var mean_rows(Var a);

Var reshape(Var a, Shape shape);
/// N x (everything else).
Var flatten(Var a);
/// Rows [begin, end) along axis 0.
Var slice_rows(Var a, std::int64_t begin, std::int64_t end);
/// Concatenation along axis 0.
Var concat_rows(const std::vector<Var>& parts);

Var conv2d(Var input, Var kernel, std::int64_t stride, std::int64_t pad);
/// Adds a per-channel bias to an NCHW tensor.
Var bias_add(Var input, Var bias);
Var avg_pool2d(Var input, std::int64_t k, std::int64_t stride);
Var max_pool2d(Var input, std::int64_t k, std::int64_t stride);
/// Mean over H and W, N x C.
Var global_avg_pool(Var input);
/// input (N x D) * weight (D x K) + bias (K).
Var linear(Var input, Var weight, Var bias);

/// Per-(sample, channel) standardization over H x W, then per-channel affine.
Var instance_norm(Var input, Var gamma, Var beta, double eps);

struct BatchMoments {
  Tensor mean;  // {C}
  Tensor var;   // {C}, biased (divides by N*H*W)
};
/// Training-mode batch norm over N x H x W per channel. Fills `moments` with
/// the batch statistics used for normalization.
Var batch_norm_train(Var input, Var gamma, Var beta, double eps, BatchMoments* moments);
/// Inference-mode batch norm with fixed statistics.
Var batch_norm_eval(Var input, Var gamma, Var beta, const Tensor& mean, const Tensor& var,
                    double eps);

/// Mean over rows of -log softmax(logits)[label], max-subtracted.
Var softmax_cross_entropy(Var logits, std::span<const int> labels);
/// Mean over rows of -sum_j target_j * log softmax(logits)_j. `target` rows
/// are probability vectors and are treated as constants.
Var soft_cross_entropy(Var logits, const Tensor& target);
/// Mean over rows of 1 - cos(a_i, b_i). A row pair with a zero vector on
/// either side contributes exactly 1 and no gradient.
Var cosine_distance_rows(Var a, Var b);

/// Sparse linear resampling of every H x W plane: output pixel q is
/// sum_t weights[q][t] * input[sources[q][t]]. Used for differentiable
/// geometric augmentation.
struct SpatialMap {
  std::int64_t in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  static constexpr int kTaps = 4;
  std::vector<std::int32_t> sources;  // out_h * out_w * kTaps, -1 = unused
  std::vector<double> weights;        // out_h * out_w * kTaps
};
Var spatial_resample(Var input, const SpatialMap& map);

/// Row-wise softmax of an N x D tensor (no graph).
Tensor softmax_rows(const Tensor& logits);

}  // namespace elfdd::ops

#pragma once

#include <cstdint>
#include <span>

#include "elfdd/tensor/tensor.hpp"

namespace elfdd {

/// Shapes of an NCHW x OIHW cross-correlation.
struct ConvGeometry {
  std::int64_t n, c, h, w;
  std::int64_t o, kh, kw;
  std::int64_t stride, pad;
  std::int64_t ho, wo;
};

/// Validates shapes and computes output dims
/// ho = floor((h + 2 pad - kh) / stride) + 1.
ConvGeometry conv_geometry(const Shape& input, const Shape& kernel, std::int64_t stride,
                           std::int64_t pad);

struct PoolGeometry {
  std::int64_t n, c, h, w;
  std::int64_t k, stride;
  std::int64_t ho, wo;
};

PoolGeometry pool_geometry(const Shape& input, std::int64_t k, std::int64_t stride);

// The two namespaces below expose identical signatures. `kernels` is the
// production path (im2col + blocked GEMM, OpenMP over independent outputs);
// `reference` is a direct serial loop nest used as the test oracle and the
// benchmark baseline. Every output element is produced by exactly one thread
// so results do not depend on the thread count.

namespace kernels {

template <class T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<T> y);
template <class T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> gy, std::span<const T> w,
                           std::span<T> gx);
template <class T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> gy, std::span<const T> x,
                            std::span<T> gw);

template <class T>
void avg_pool_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y);
template <class T>
void avg_pool_backward(const PoolGeometry& g, std::span<const T> gy, std::span<T> gx);
template <class T>
void max_pool_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y,
                      std::span<std::int64_t> argmax);
template <class T>
void max_pool_backward(const PoolGeometry& g, std::span<const T> gy,
                       std::span<const std::int64_t> argmax, std::span<T> gx);

/// c (m x n) = op(a) * op(b), or c += ... when accumulate is set.
template <class T>
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
          std::span<const T> a, std::span<const T> b, std::span<T> c, bool accumulate = false);

}  // namespace kernels

namespace reference {

template <class T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<T> y);
template <class T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> gy, std::span<const T> w,
                           std::span<T> gx);
template <class T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> gy, std::span<const T> x,
                            std::span<T> gw);

template <class T>
void avg_pool_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y);
template <class T>
void avg_pool_backward(const PoolGeometry& g, std::span<const T> gy, std::span<T> gx);
template <class T>
void max_pool_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y,
                      std::span<std::int64_t> argmax);
template <class T>
void max_pool_backward(const PoolGeometry& g, std::span<const T> gy,
                       std::span<const std::int64_t> argmax, std::span<T> gx);

template <class T>
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
          std::span<const T> a, std::span<const T> b, std::span<T> c, bool accumulate = false);

}  // namespace reference

}  // namespace elfdd

#include "elfdd/tensor/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <limits>
#include <vector>

namespace elfdd {

ConvGeometry conv_geometry(const Shape& input, const Shape& kernel, std::int64_t stride,
                           std::int64_t pad) {
  if (input.size() != 4) throw ShapeError("conv2d: input must be NCHW, got " + shape_string(input));
  if (kernel.size() != 4) throw ShapeError("conv2d: kernel must be OIHW, got " + shape_string(kernel));
  if (stride <= 0) throw ValueError("conv2d: stride must be positive");
  if (pad < 0) throw ValueError("conv2d: pad must be nonnegative");
  if (input[1] != kernel[1]) {
    throw ShapeError("conv2d: input axis C=" + std::to_string(input[1]) +
                     " does not match kernel axis I=" + std::to_string(kernel[1]));
  }
  ConvGeometry g{input[0], input[1], input[2], input[3], kernel[0], kernel[2], kernel[3],
                 stride,   pad,      0,        0};
  const auto span_h = g.h + 2 * pad - g.kh;
  const auto span_w = g.w + 2 * pad - g.kw;
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("conv2d: nonpositive output size for input " + shape_string(input) +
                     " kernel " + shape_string(kernel) + " pad " + std::to_string(pad));
  }
  g.ho = span_h / stride + 1;
  g.wo = span_w / stride + 1;
  return g;
}

PoolGeometry pool_geometry(const Shape& input, std::int64_t k, std::int64_t stride) {
  if (input.size() != 4) throw ShapeError("pool: input must be NCHW, got " + shape_string(input));
  if (k <= 0 || stride <= 0) throw ValueError("pool: window and stride must be positive");
  if (k > input[2] || k > input[3]) {
    throw ShapeError("pool: window " + std::to_string(k) + " too large for input " +
                     shape_string(input));
  }
  PoolGeometry g{input[0], input[1], input[2], input[3], k, stride, 0, 0};
  g.ho = (g.h - k) / stride + 1;
  g.wo = (g.w - k) / stride + 1;
  return g;
}

namespace kernels {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Upper bound on im2col buffer elements; larger batches are processed in chunks.
constexpr std::int64_t kColsBudget = std::int64_t{1} << 23;

std::int64_t chunk_samples(const ConvGeometry& g) {
  const auto per_sample = g.c * g.kh * g.kw * g.ho * g.wo;
  return std::clamp<std::int64_t>(kColsBudget / std::max<std::int64_t>(per_sample, 1), 1, g.n);
}

// cols[(c, i, j)][(n - n0, oh, ow)] for samples [n0, n0 + count).
template <class T>
void im2col(const ConvGeometry& g, const T* x, std::int64_t n0, std::int64_t count, T* cols) {
  const auto p = g.ho * g.wo;
  const auto rows = g.c * g.kh * g.kw;
  const auto width = count * p;
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto c = r / (g.kh * g.kw);
    const auto i = (r / g.kw) % g.kh;
    const auto j = r % g.kw;
    T* dst = cols + r * width;
    for (std::int64_t s = 0; s < count; ++s) {
      const T* plane = x + ((n0 + s) * g.c + c) * g.h * g.w;
      for (std::int64_t oh = 0; oh < g.ho; ++oh) {
        const auto ih = oh * g.stride - g.pad + i;
        T* out = dst + s * p + oh * g.wo;
        if (ih < 0 || ih >= g.h) {
          std::fill(out, out + g.wo, T(0));
          continue;
        }
        const T* row = plane + ih * g.w;
        for (std::int64_t ow = 0; ow < g.wo; ++ow) {
          const auto iw = ow * g.stride - g.pad + j;
          out[ow] = (iw >= 0 && iw < g.w) ? row[iw] : T(0);
        }
      }
    }
  }
}

// Inverse scatter of im2col; each (sample, channel) plane is owned by one thread.
template <class T>
void col2im(const ConvGeometry& g, const T* cols, std::int64_t n0, std::int64_t count, T* gx) {
  const auto p = g.ho * g.wo;
  const auto width = count * p;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t s = 0; s < count; ++s) {
    for (std::int64_t c = 0; c < g.c; ++c) {
      T* plane = gx + ((n0 + s) * g.c + c) * g.h * g.w;
      for (std::int64_t i = 0; i < g.kh; ++i) {
        for (std::int64_t j = 0; j < g.kw; ++j) {
          const T* src = cols + ((c * g.kh + i) * g.kw + j) * width + s * p;
          for (std::int64_t oh = 0; oh < g.ho; ++oh) {
            const auto ih = oh * g.stride - g.pad + i;
            if (ih < 0 || ih >= g.h) continue;
            for (std::int64_t ow = 0; ow < g.wo; ++ow) {
              const auto iw = ow * g.stride - g.pad + j;
              if (iw >= 0 && iw < g.w) plane[ih * g.w + iw] += src[oh * g.wo + ow];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
          std::span<const T> a, std::span<const T> b, std::span<T> c, bool accumulate) {
  using Map = Eigen::Map<const RowMat<T>>;
  Map am(a.data(), trans_a ? k : m, trans_a ? m : k);
  Map bm(b.data(), trans_b ? n : k, trans_b ? k : n);
  Eigen::Map<RowMat<T>> cm(c.data(), m, n);
  if (!accumulate) cm.setZero();
  if (trans_a && trans_b) {
    cm.noalias() += am.transpose() * bm.transpose();
  } else if (trans_a) {
    cm.noalias() += am.transpose() * bm;
  } else if (trans_b) {
    cm.noalias() += am * bm.transpose();
  } else {
    cm.noalias() += am * bm;
  }
}

template <class T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<T> y) {
  const auto p = g.ho * g.wo;
  const auto rows = g.c * g.kh * g.kw;
  const auto chunk = chunk_samples(g);
  std::vector<T> cols(static_cast<std::size_t>(rows * chunk * p));
  std::vector<T> out(static_cast<std::size_t>(g.o * chunk * p));
  for (std::int64_t n0 = 0; n0 < g.n; n0 += chunk) {
    const auto count = std::min(chunk, g.n - n0);
    im2col(g, x.data(), n0, count, cols.data());
    gemm<T>(false, false, g.o, count * p, rows, w, cols, out);
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t s = 0; s < count; ++s) {
      for (std::int64_t o = 0; o < g.o; ++o) {
        std::copy_n(out.data() + o * count * p + s * p, p, y.data() + ((n0 + s) * g.o + o) * p);
      }
    }
  }
}

template <class T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> gy, std::span<const T> w,
                           std::span<T> gx) {
  const auto p = g.ho * g.wo;
  const auto rows = g.c * g.kh * g.kw;
  const auto chunk = chunk_samples(g);
  std::vector<T> gyt(static_cast<std::size_t>(g.o * chunk * p));
  std::vector<T> dcols(static_cast<std::size_t>(rows * chunk * p));
  std::fill(gx.begin(), gx.end(), T(0));
  for (std::int64_t n0 = 0; n0 < g.n; n0 += chunk) {
    const auto count = std::min(chunk, g.n - n0);
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t s = 0; s < count; ++s) {
      for (std::int64_t o = 0; o < g.o; ++o) {
        std::copy_n(gy.data() + ((n0 + s) * g.o + o) * p, p, gyt.data() + o * count * p + s * p);
      }
    }
    gemm<T>(true, false, rows, count * p, g.o, w, gyt, dcols);
    col2im(g, dcols.data(), n0, count, gx.data());
  }
}

template <class T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> gy, std::span<const T> x,
                            std::span<T> gw) {
  const auto p = g.ho * g.wo;
  const auto rows = g.c * g.kh * g.kw;
  const auto chunk = chunk_samples(g);
  std::vector<T> gyt(static_cast<std::size_t>(g.o * chunk * p));
  std::vector<T> cols(static_cast<std::size_t>(rows * chunk * p));
  std::fill(gw.begin(), gw.end(), T(0));
  for (std::int64_t n0 = 0; n0 < g.n; n0 += chunk) {
    const auto count = std::min(chunk, g.n - n0);
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t s = 0; s < count; ++s) {
      for (std::int64_t o = 0; o < g.o; ++o) {
        std::copy_n(gy.data() + ((n0 + s) * g.o + o) * p, p, gyt.data() + o * count * p + s * p);
      }
    }
    im2col(g, x.data(), n0, count, cols.data());
    gemm<T>(false, true, g.o, rows, count * p, gyt, cols, gw, /*accumulate=*/true);
  }
}

template <class T>
void avg_pool_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y) {
  const T inv = T(1) / static_cast<T>(g.k * g.k);
#pragma omp parallel for schedule(static)
  for (std::int64_t plane = 0; plane < g.n * g.c; ++plane) {
    const T* src = x.data() + plane * g.h * g.w;
    T* dst = y.data() + plane * g.ho * g.wo;
    for (std::int64_t oh = 0; oh < g.ho; ++oh) {
      for (std::int64_t ow = 0; ow < g.wo; ++ow) {
        T acc = 0;
        for (std::int64_t i = 0; i < g.k; ++i) {
          const T* row = src + (oh * g.stride + i) * g.w + ow * g.stride;
          for (std::int64_t j = 0; j < g.k; ++j) acc += row[j];
        }
        dst[oh * g.wo + ow] = acc * inv;
      }
    }
  }
}

template <class T>
void avg_pool_backward(const PoolGeometry& g, std::span<const T> gy, std::span<T> gx) {
  const T inv = T(1) / static_cast<T>(g.k * g.k);
  std::fill(gx.begin(), gx.end(), T(0));
#pragma omp parallel for schedule(static)
  for (std::int64_t plane = 0; plane < g.n * g.c; ++plane) {
    const T* src = gy.data() + plane * g.ho * g.wo;
    T* dst = gx.data() + plane * g.h * g.w;
    for (std::int64_t oh = 0; oh < g.ho; ++oh) {
      for (std::int64_t ow = 0; ow < g.wo; ++ow) {
        const T v = src[oh * g.wo + ow] * inv;
        for (std::int64_t i = 0; i < g.k; ++i) {
          T* row = dst + (oh * g.stride + i) * g.w + ow * g.stride;
          for (std::int64_t j = 0; j < g.k; ++j) row[j] += v;
        }
      }
    }
  }
}

template <class T>
void max_pool_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y,
                      std::span<std::int64_t> argmax) {
#pragma omp parallel for schedule(static)
  for (std::int64_t plane = 0; plane < g.n * g.c; ++plane) {
    const T* src = x.data() + plane * g.h * g.w;
    for (std::int64_t oh = 0; oh < g.ho; ++oh) {
      for (std::int64_t ow = 0; ow < g.wo; ++ow) {
        T best = -std::numeric_limits<T>::infinity();
        std::int64_t at = 0;
        for (std::int64_t i = 0; i < g.k; ++i) {
          for (std::int64_t j = 0; j < g.k; ++j) {
            const auto idx = (oh * g.stride + i) * g.w + ow * g.stride + j;
            if (src[idx] > best) {
              best = src[idx];
              at = idx;
            }
          }
        }
        const auto o = plane * g.ho * g.wo + oh * g.wo + ow;
        y[o] = best;
        argmax[o] = plane * g.h * g.w + at;
      }
    }
  }
}

template <class T>
void max_pool_backward(const PoolGeometry& g, std::span<const T> gy,
                       std::span<const std::int64_t> argmax, std::span<T> gx) {
  std::fill(gx.begin(), gx.end(), T(0));
  const auto per_plane = g.ho * g.wo;
#pragma omp parallel for schedule(static)
  for (std::int64_t plane = 0; plane < g.n * g.c; ++plane) {
    for (std::int64_t q = plane * per_plane; q < (plane + 1) * per_plane; ++q) {
      gx[argmax[q]] += gy[q];
    }
  }
}

#define ELFDD_INSTANTIATE(T)                                                                     \
  template void gemm<T>(bool, bool, std::int64_t, std::int64_t, std::int64_t, std::span<const T>, \
                        std::span<const T>, std::span<T>, bool);                                 \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,   \
                                  std::span<T>);                                                 \
  template void conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>,                \
                                         std::span<const T>, std::span<T>);                      \
  template void conv2d_backward_weight<T>(const ConvGeometry&, std::span<const T>,               \
                                          std::span<const T>, std::span<T>);                     \
  template void avg_pool_forward<T>(const PoolGeometry&, std::span<const T>, std::span<T>);      \
  template void avg_pool_backward<T>(const PoolGeometry&, std::span<const T>, std::span<T>);     \
  template void max_pool_forward<T>(const PoolGeometry&, std::span<const T>, std::span<T>,       \
                                    std::span<std::int64_t>);                                    \
  template void max_pool_backward<T>(const PoolGeometry&, std::span<const T>,                    \
                                     std::span<const std::int64_t>, std::span<T>);

ELFDD_INSTANTIATE(float)
ELFDD_INSTANTIATE(double)

}  // namespace kernels

}  // namespace elfdd

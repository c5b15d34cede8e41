// Direct loop nests. Slow on purpose: these are the oracles the parallel
// kernels are tested against.

#include <algorithm>
#include <limits>

#include "elfdd/tensor/kernels.hpp"

namespace elfdd::reference {

template <class T>
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
          std::span<const T> a, std::span<const T> b, std::span<T> c, bool accumulate) {
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      T acc = 0;
      for (std::int64_t l = 0; l < k; ++l) {
        const T av = trans_a ? a[l * m + i] : a[i * k + l];
        const T bv = trans_b ? b[j * k + l] : b[l * n + j];
        acc += av * bv;
      }
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

template <class T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<T> y) {
  for (std::int64_t n = 0; n < g.n; ++n)
    for (std::int64_t o = 0; o < g.o; ++o)
      for (std::int64_t oh = 0; oh < g.ho; ++oh)
        for (std::int64_t ow = 0; ow < g.wo; ++ow) {
          T acc = 0;
          for (std::int64_t c = 0; c < g.c; ++c)
            for (std::int64_t i = 0; i < g.kh; ++i)
              for (std::int64_t j = 0; j < g.kw; ++j) {
                const auto ih = oh * g.stride - g.pad + i;
                const auto iw = ow * g.stride - g.pad + j;
                if (ih < 0 || ih >= g.h || iw < 0 || iw >= g.w) continue;
                acc += x[((n * g.c + c) * g.h + ih) * g.w + iw] *
                       w[((o * g.c + c) * g.kh + i) * g.kw + j];
              }
          y[((n * g.o + o) * g.ho + oh) * g.wo + ow] = acc;
        }
}

template <class T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> gy, std::span<const T> w,
                           std::span<T> gx) {
  std::fill(gx.begin(), gx.end(), T(0));
  for (std::int64_t n = 0; n < g.n; ++n)
    for (std::int64_t o = 0; o < g.o; ++o)
      for (std::int64_t oh = 0; oh < g.ho; ++oh)
        for (std::int64_t ow = 0; ow < g.wo; ++ow) {
          const T go = gy[((n * g.o + o) * g.ho + oh) * g.wo + ow];
          for (std::int64_t c = 0; c < g.c; ++c)
            for (std::int64_t i = 0; i < g.kh; ++i)
              for (std::int64_t j = 0; j < g.kw; ++j) {
                const auto ih = oh * g.stride - g.pad + i;
                const auto iw = ow * g.stride - g.pad + j;
                if (ih < 0 || ih >= g.h || iw < 0 || iw >= g.w) continue;
                gx[((n * g.c + c) * g.h + ih) * g.w + iw] +=
                    go * w[((o * g.c + c) * g.kh + i) * g.kw + j];
              }
        }
}

template <class T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> gy, std::span<const T> x,
                            std::span<T> gw) {
  std::fill(gw.begin(), gw.end(), T(0));
  for (std::int64_t n = 0; n < g.n; ++n)
    for (std::int64_t o = 0; o < g.o; ++o)
      for (std::int64_t oh = 0; oh < g.ho; ++oh)
        for (std::int64_t ow = 0; ow < g.wo; ++ow) {
          const T go = gy[((n * g.o + o) * g.ho + oh) * g.wo + ow];
          for (std::int64_t c = 0; c < g.c; ++c)
            for (std::int64_t i = 0; i < g.kh; ++i)
              for (std::int64_t j = 0; j < g.kw; ++j) {
                const auto ih = oh * g.stride - g.pad + i;
                const auto iw = ow * g.stride - g.pad + j;
                if (ih < 0 || ih >= g.h || iw < 0 || iw >= g.w) continue;
                gw[((o * g.c + c) * g.kh + i) * g.kw + j] +=
                    go * x[((n * g.c + c) * g.h + ih) * g.w + iw];
              }
        }
}

template <class T>
void avg_pool_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y) {
  for (std::int64_t nc = 0; nc < g.n * g.c; ++nc)
    for (std::int64_t oh = 0; oh < g.ho; ++oh)
      for (std::int64_t ow = 0; ow < g.wo; ++ow) {
        T acc = 0;
        for (std::int64_t i = 0; i < g.k; ++i)
          for (std::int64_t j = 0; j < g.k; ++j)
            acc += x[(nc * g.h + oh * g.stride + i) * g.w + ow * g.stride + j];
        y[(nc * g.ho + oh) * g.wo + ow] = acc / static_cast<T>(g.k * g.k);
      }
}

template <class T>
void avg_pool_backward(const PoolGeometry& g, std::span<const T> gy, std::span<T> gx) {
  std::fill(gx.begin(), gx.end(), T(0));
  for (std::int64_t nc = 0; nc < g.n * g.c; ++nc)
    for (std::int64_t oh = 0; oh < g.ho; ++oh)
      for (std::int64_t ow = 0; ow < g.wo; ++ow)
        for (std::int64_t i = 0; i < g.k; ++i)
          for (std::int64_t j = 0; j < g.k; ++j)
            gx[(nc * g.h + oh * g.stride + i) * g.w + ow * g.stride + j] +=
                gy[(nc * g.ho + oh) * g.wo + ow] / static_cast<T>(g.k * g.k);
}

template <class T>
void max_pool_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y,
                      std::span<std::int64_t> argmax) {
  for (std::int64_t nc = 0; nc < g.n * g.c; ++nc)
    for (std::int64_t oh = 0; oh < g.ho; ++oh)
      for (std::int64_t ow = 0; ow < g.wo; ++ow) {
        T best = -std::numeric_limits<T>::infinity();
        std::int64_t at = 0;
        for (std::int64_t i = 0; i < g.k; ++i)
          for (std::int64_t j = 0; j < g.k; ++j) {
            const auto idx = (nc * g.h + oh * g.stride + i) * g.w + ow * g.stride + j;
            if (x[idx] > best) {
              best = x[idx];
              at = idx;
            }
          }
        y[(nc * g.ho + oh) * g.wo + ow] = best;
        argmax[(nc * g.ho + oh) * g.wo + ow] = at;
      }
}

template <class T>
void max_pool_backward(const PoolGeometry& g, std::span<const T> gy,
                       std::span<const std::int64_t> argmax, std::span<T> gx) {
  std::fill(gx.begin(), gx.end(), T(0));
  for (std::int64_t q = 0; q < g.n * g.c * g.ho * g.wo; ++q) gx[argmax[q]] += gy[q];
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

}  // namespace elfdd::reference

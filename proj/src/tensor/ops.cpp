#include "elfdd/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "elfdd/tensor/kernels.hpp"

namespace elfdd::ops {

namespace {

Graph& same_graph(std::initializer_list<Var> vars) {
  Graph* g = nullptr;
  for (const auto& v : vars) {
    if (g == nullptr) {
      g = &v.graph();
    } else if (g != &v.graph()) {
      throw ValueError("operands belong to different graphs");
    }
  }
  return *g;
}

template <class T>
std::span<const T> view(const Tensor& t) {
  return t.data<T>();
}

template <class T>
std::vector<T> zeros_like(const Tensor& t) {
  return std::vector<T>(static_cast<std::size_t>(t.numel()), T(0));
}

template <class T, class F, class DF>
Var unary(std::string_view name, Var a, F f, DF df) {
  const Tensor x = a.value();
  auto xs = view<T>(x);
  std::vector<T> y(xs.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xs[i]);
  Tensor out = Tensor::from(x.shape(), std::move(y));
  return a.graph().record(name, out, {a}, [x, df](const Tensor& g, const std::vector<bool>&) {
    auto xs = view<T>(x);
    auto gs = view<T>(g);
    std::vector<T> gx(xs.size());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = df(xs[i], gs[i]);
    return std::vector<Tensor>{Tensor::from(x.shape(), std::move(gx))};
  });
}

std::int64_t rows_of(const Tensor& t) { return t.dim(0); }
std::int64_t cols_of(const Tensor& t) { return t.numel() / t.dim(0); }

}  // namespace

Var add(Var a, Var b) {
  Graph& g = same_graph({a, b});
  Tensor out = elfdd::add(a.value(), b.value());
  return g.record("add", out, {a, b}, [](const Tensor& go, const std::vector<bool>&) {
    return std::vector<Tensor>{go, go};
  });
}

Var sub(Var a, Var b) {
  Graph& g = same_graph({a, b});
  Tensor out = elfdd::sub(a.value(), b.value());
  return g.record("sub", out, {a, b}, [](const Tensor& go, const std::vector<bool>& needs) {
    return std::vector<Tensor>{go, needs[1] ? elfdd::scale(go, -1.0) : Tensor()};
  });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph({a, b});
  const Tensor av = a.value();
  const Tensor bv = b.value();
  Tensor out = elfdd::mul(av, bv);
  return g.record("mul", out, {a, b}, [av, bv](const Tensor& go, const std::vector<bool>& needs) {
    return std::vector<Tensor>{needs[0] ? elfdd::mul(go, bv) : Tensor(),
                               needs[1] ? elfdd::mul(go, av) : Tensor()};
  });
}

Var scale(Var a, double factor) {
  Tensor out = elfdd::scale(a.value(), factor);
  return a.graph().record("scale", out, {a},
                          [factor](const Tensor& go, const std::vector<bool>&) {
                            return std::vector<Tensor>{elfdd::scale(go, factor)};
                          });
}

Var square(Var a) {
  return dispatch(a.dtype(), [&]<class T>() {
    return unary<T>(
        "square", a, [](T x) { return x * x; }, [](T x, T g) { return T(2) * x * g; });
  });
}

Var abs(Var a) {
  return dispatch(a.dtype(), [&]<class T>() {
    return unary<T>(
        "abs", a, [](T x) { return std::abs(x); },
        [](T x, T g) { return x > T(0) ? g : (x < T(0) ? -g : T(0)); });
  });
}

Var relu(Var a) {
  return dispatch(a.dtype(), [&]<class T>() {
    // Subgradient at 0 is 0; NaN passes through so it can be detected downstream.
    return unary<T>(
        "relu", a, [](T x) { return !(x <= T(0)) ? x : T(0); },
        [](T x, T g) { return x > T(0) ? g : T(0); });
  });
}

Var sum(Var a) {
  const Tensor x = a.value();
  Tensor out = Tensor::scalar(elfdd::sum(x), x.dtype());
  return a.graph().record("sum", out, {a}, [x](const Tensor& go, const std::vector<bool>&) {
    return std::vector<Tensor>{Tensor::full(x.shape(), go.item(), x.dtype())};
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().numel())); }

Var mean_rows(Var a) {
  const Tensor x = a.value();
  if (x.rank() < 1) throw ShapeError("mean_rows: needs rank >= 1");
  const auto n = rows_of(x);
  const auto d = cols_of(x);
  return dispatch(x.dtype(), [&]<class T>() {
    auto xs = view<T>(x);
    std::vector<T> y(static_cast<std::size_t>(d), T(0));
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < d; ++j) y[j] += xs[i * d + j];
    for (auto& v : y) v /= static_cast<T>(n);
    Tensor out = Tensor::from({d}, std::move(y));
    return a.graph().record("mean_rows", out, {a},
                            [shape = x.shape(), n, d](const Tensor& go, const std::vector<bool>&) {
                              auto gs = view<T>(go);
                              std::vector<T> gx(static_cast<std::size_t>(n * d));
                              for (std::int64_t i = 0; i < n; ++i)
                                for (std::int64_t j = 0; j < d; ++j)
                                  gx[i * d + j] = gs[j] / static_cast<T>(n);
                              return std::vector<Tensor>{Tensor::from(shape, std::move(gx))};
                            });
  });
}

Var reshape(Var a, Shape shape) {
  const Shape original = a.shape();
  Tensor out = a.value().reshape(std::move(shape));
  return a.graph().record("reshape", out, {a},
                          [original](const Tensor& go, const std::vector<bool>&) {
                            return std::vector<Tensor>{go.reshape(original)};
                          });
}

Var flatten(Var a) {
  const auto n = a.value().dim(0);
  return reshape(a, {n, a.value().numel() / n});
}

Var slice_rows(Var a, std::int64_t begin, std::int64_t end) {
  const Tensor x = a.value();
  const auto n = rows_of(x);
  if (begin < 0 || end > n || begin >= end) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + std::to_string(n) + " rows");
  }
  const auto row = cols_of(x);
  Shape shape = x.shape();
  shape[0] = end - begin;
  return dispatch(x.dtype(), [&]<class T>() {
    auto xs = view<T>(x);
    std::vector<T> y(xs.begin() + begin * row, xs.begin() + end * row);
    Tensor out = Tensor::from(shape, std::move(y));
    return a.graph().record(
        "slice_rows", out, {a},
        [xshape = x.shape(), begin, row](const Tensor& go, const std::vector<bool>&) {
          std::vector<T> gx(static_cast<std::size_t>(shape_numel(xshape)), T(0));
          auto gs = view<T>(go);
          std::copy(gs.begin(), gs.end(), gx.begin() + begin * row);
          return std::vector<Tensor>{Tensor::from(xshape, std::move(gx))};
        });
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Graph& g = parts.front().graph();
  const Tensor& first = parts.front().value();
  Shape shape = first.shape();
  std::int64_t rows = 0;
  std::vector<std::int64_t> offsets;
  for (const auto& p : parts) {
    if (&p.graph() != &g) throw ValueError("concat_rows: operands belong to different graphs");
    const Tensor& v = p.value();
    require_same_dtype(first, v, "concat_rows");
    if (v.rank() != first.rank() ||
        !std::equal(v.shape().begin() + 1, v.shape().end(), first.shape().begin() + 1)) {
      throw ShapeError("concat_rows: trailing dims differ: " + shape_string(first.shape()) +
                       " vs " + shape_string(v.shape()));
    }
    offsets.push_back(rows);
    rows += v.dim(0);
  }
  shape[0] = rows;
  const auto row = cols_of(first);
  return dispatch(first.dtype(), [&]<class T>() {
    std::vector<T> y;
    y.reserve(static_cast<std::size_t>(rows * row));
    std::vector<Shape> shapes;
    for (const auto& p : parts) {
      auto s = view<T>(p.value());
      y.insert(y.end(), s.begin(), s.end());
      shapes.push_back(p.shape());
    }
    Tensor out = Tensor::from(shape, std::move(y));
    return g.record("concat_rows", out, parts,
                    [shapes, offsets, row](const Tensor& go, const std::vector<bool>& needs) {
                      auto gs = view<T>(go);
                      std::vector<Tensor> res(shapes.size());
                      for (std::size_t i = 0; i < shapes.size(); ++i) {
                        if (!needs[i]) continue;
                        const auto begin = gs.begin() + offsets[i] * row;
                        res[i] = Tensor::from(
                            shapes[i], std::vector<T>(begin, begin + shape_numel(shapes[i])));
                      }
                      return res;
                    });
  });
}

Var conv2d(Var input, Var kernel, std::int64_t stride, std::int64_t pad) {
  Graph& gr = same_graph({input, kernel});
  const Tensor x = input.value();
  const Tensor w = kernel.value();
  require_same_dtype(x, w, "conv2d");
  const ConvGeometry geo = conv_geometry(x.shape(), w.shape(), stride, pad);
  return dispatch(x.dtype(), [&]<class T>() {
    std::vector<T> y(static_cast<std::size_t>(geo.n * geo.o * geo.ho * geo.wo));
    kernels::conv2d_forward<T>(geo, view<T>(x), view<T>(w), y);
    Tensor out = Tensor::from({geo.n, geo.o, geo.ho, geo.wo}, std::move(y));
    return gr.record("conv2d", out, {input, kernel},
                     [x, w, geo](const Tensor& go, const std::vector<bool>& needs) {
                       std::vector<Tensor> res(2);
                       if (needs[0]) {
                         auto gx = zeros_like<T>(x);
                         kernels::conv2d_backward_input<T>(geo, view<T>(go), view<T>(w), gx);
                         res[0] = Tensor::from(x.shape(), std::move(gx));
                       }
                       if (needs[1]) {
                         auto gw = zeros_like<T>(w);
                         kernels::conv2d_backward_weight<T>(geo, view<T>(go), view<T>(x), gw);
                         res[1] = Tensor::from(w.shape(), std::move(gw));
                       }
                       return res;
                     });
  });
}

Var bias_add(Var input, Var bias) {
  Graph& gr = same_graph({input, bias});
  const Tensor x = input.value();
  const Tensor b = bias.value();
  require_same_dtype(x, b, "bias_add");
  if (x.rank() != 4 || b.rank() != 1 || b.dim(0) != x.dim(1)) {
    throw ShapeError("bias_add: bias " + shape_string(b.shape()) + " does not match channels of " +
                     shape_string(x.shape()));
  }
  const auto n = x.dim(0), c = x.dim(1), p = x.dim(2) * x.dim(3);
  return dispatch(x.dtype(), [&]<class T>() {
    auto xs = view<T>(x);
    auto bs = view<T>(b);
    std::vector<T> y(xs.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t plane = 0; plane < n * c; ++plane) {
      const T bv = bs[plane % c];
      for (std::int64_t q = 0; q < p; ++q) y[plane * p + q] = xs[plane * p + q] + bv;
    }
    Tensor out = Tensor::from(x.shape(), std::move(y));
    return gr.record("bias_add", out, {input, bias},
                     [n, c, p](const Tensor& go, const std::vector<bool>& needs) {
                       std::vector<Tensor> res{go, Tensor()};
                       if (needs[1]) {
                         auto gs = view<T>(go);
                         std::vector<T> gb(static_cast<std::size_t>(c), T(0));
                         for (std::int64_t plane = 0; plane < n * c; ++plane) {
                           T acc = 0;
                           for (std::int64_t q = 0; q < p; ++q) acc += gs[plane * p + q];
                           gb[plane % c] += acc;
                         }
                         res[1] = Tensor::from({c}, std::move(gb));
                       }
                       return res;
                     });
  });
}

Var avg_pool2d(Var input, std::int64_t k, std::int64_t stride) {
  const Tensor x = input.value();
  const PoolGeometry geo = pool_geometry(x.shape(), k, stride);
  return dispatch(x.dtype(), [&]<class T>() {
    std::vector<T> y(static_cast<std::size_t>(geo.n * geo.c * geo.ho * geo.wo));
    kernels::avg_pool_forward<T>(geo, view<T>(x), y);
    Tensor out = Tensor::from({geo.n, geo.c, geo.ho, geo.wo}, std::move(y));
    return input.graph().record("avg_pool2d", out, {input},
                                [geo, shape = x.shape()](const Tensor& go, const std::vector<bool>&) {
                                  std::vector<T> gx(static_cast<std::size_t>(shape_numel(shape)));
                                  kernels::avg_pool_backward<T>(geo, view<T>(go), gx);
                                  return std::vector<Tensor>{Tensor::from(shape, std::move(gx))};
                                });
  });
}

Var max_pool2d(Var input, std::int64_t k, std::int64_t stride) {
  const Tensor x = input.value();
  const PoolGeometry geo = pool_geometry(x.shape(), k, stride);
  return dispatch(x.dtype(), [&]<class T>() {
    const auto count = static_cast<std::size_t>(geo.n * geo.c * geo.ho * geo.wo);
    std::vector<T> y(count);
    auto argmax = std::make_shared<std::vector<std::int64_t>>(count);
    kernels::max_pool_forward<T>(geo, view<T>(x), y, *argmax);
    Tensor out = Tensor::from({geo.n, geo.c, geo.ho, geo.wo}, std::move(y));
    return input.graph().record(
        "max_pool2d", out, {input},
        [geo, argmax, shape = x.shape()](const Tensor& go, const std::vector<bool>&) {
          std::vector<T> gx(static_cast<std::size_t>(shape_numel(shape)));
          kernels::max_pool_backward<T>(geo, view<T>(go), *argmax, gx);
          return std::vector<Tensor>{Tensor::from(shape, std::move(gx))};
        });
  });
}

Var global_avg_pool(Var input) {
  const Tensor x = input.value();
  if (x.rank() != 4) throw ShapeError("global_avg_pool: expects NCHW, got " + shape_string(x.shape()));
  const auto n = x.dim(0), c = x.dim(1), p = x.dim(2) * x.dim(3);
  return dispatch(x.dtype(), [&]<class T>() {
    auto xs = view<T>(x);
    std::vector<T> y(static_cast<std::size_t>(n * c));
    for (std::int64_t plane = 0; plane < n * c; ++plane) {
      T acc = 0;
      for (std::int64_t q = 0; q < p; ++q) acc += xs[plane * p + q];
      y[plane] = acc / static_cast<T>(p);
    }
    Tensor out = Tensor::from({n, c}, std::move(y));
    return input.graph().record("global_avg_pool", out, {input},
                                [shape = x.shape(), n, c, p](const Tensor& go,
                                                             const std::vector<bool>&) {
                                  auto gs = view<T>(go);
                                  std::vector<T> gx(static_cast<std::size_t>(n * c * p));
                                  for (std::int64_t plane = 0; plane < n * c; ++plane) {
                                    const T v = gs[plane] / static_cast<T>(p);
                                    std::fill_n(gx.begin() + plane * p, p, v);
                                  }
                                  return std::vector<Tensor>{Tensor::from(shape, std::move(gx))};
                                });
  });
}

Var linear(Var input, Var weight, Var bias) {
  Graph& gr = same_graph({input, weight, bias});
  const Tensor x = input.value();
  const Tensor w = weight.value();
  const Tensor b = bias.value();
  require_same_dtype(x, w, "linear");
  require_same_dtype(x, b, "linear");
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0)) {
    throw ShapeError("linear: inner dims disagree, input " + shape_string(x.shape()) + " weight " +
                     shape_string(w.shape()));
  }
  if (b.rank() != 1 || b.dim(0) != w.dim(1)) {
    throw ShapeError("linear: bias " + shape_string(b.shape()) + " does not match weight " +
                     shape_string(w.shape()));
  }
  const auto n = x.dim(0), d = x.dim(1), k = w.dim(1);
  return dispatch(x.dtype(), [&]<class T>() {
    std::vector<T> y(static_cast<std::size_t>(n * k));
    auto bs = view<T>(b);
    for (std::int64_t i = 0; i < n; ++i) std::copy(bs.begin(), bs.end(), y.begin() + i * k);
    kernels::gemm<T>(false, false, n, k, d, view<T>(x), view<T>(w), y, /*accumulate=*/true);
    Tensor out = Tensor::from({n, k}, std::move(y));
    return gr.record("linear", out, {input, weight, bias},
                     [x, w, n, d, k](const Tensor& go, const std::vector<bool>& needs) {
                       std::vector<Tensor> res(3);
                       auto gs = view<T>(go);
                       if (needs[0]) {
                         std::vector<T> gx(static_cast<std::size_t>(n * d));
                         kernels::gemm<T>(false, true, n, d, k, gs, view<T>(w), gx);
                         res[0] = Tensor::from({n, d}, std::move(gx));
                       }
                       if (needs[1]) {
                         std::vector<T> gw(static_cast<std::size_t>(d * k));
                         kernels::gemm<T>(true, false, d, k, n, view<T>(x), gs, gw);
                         res[1] = Tensor::from({d, k}, std::move(gw));
                       }
                       if (needs[2]) {
                         std::vector<T> gb(static_cast<std::size_t>(k), T(0));
                         for (std::int64_t i = 0; i < n; ++i)
                           for (std::int64_t j = 0; j < k; ++j) gb[j] += gs[i * k + j];
                         res[2] = Tensor::from({k}, std::move(gb));
                       }
                       return res;
                     });
  });
}

namespace {

void check_norm_args(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                     const char* op) {
  if (x.rank() != 4) throw ShapeError(std::string(op) + ": expects NCHW, got " + shape_string(x.shape()));
  require_same_dtype(x, gamma, op);
  require_same_dtype(x, beta, op);
  const Shape c{x.dim(1)};
  if (gamma.shape() != c || beta.shape() != c) {
    throw ShapeError(std::string(op) + ": gamma/beta must have shape " + shape_string(c));
  }
  if (!(eps > 0.0)) throw ValueError(std::string(op) + ": eps must be positive");
}

// Normalization over groups of elements that share one (mean, inv_std).
// Element (n, c, q) belongs to group group_of(n, c).
template <class T>
struct NormSaved {
  std::vector<T> xhat;
  std::vector<T> inv_std;  // per group
};

// Backward of y = gamma_c * xhat + beta_c with xhat standardized per group.
// `group_size` counts the elements sharing one statistic.
template <class T, class GroupOf>
std::vector<Tensor> norm_backward(const Tensor& go, const Tensor& gamma, const NormSaved<T>& s,
                                  std::int64_t n, std::int64_t c, std::int64_t p,
                                  std::int64_t groups, std::int64_t group_size, GroupOf group_of,
                                  const std::vector<bool>& needs, const Shape& shape) {
  auto gs = view<T>(go);
  auto gam = view<T>(gamma);
  std::vector<Tensor> res(3);
  // Per-group sums of dxhat and dxhat * xhat.
  std::vector<T> sum_d(static_cast<std::size_t>(groups), T(0));
  std::vector<T> sum_dx(static_cast<std::size_t>(groups), T(0));
  std::vector<T> dgamma(static_cast<std::size_t>(c), T(0));
  std::vector<T> dbeta(static_cast<std::size_t>(c), T(0));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const auto base = (i * c + ch) * p;
      const auto grp = group_of(i, ch);
      T sd = 0, sdx = 0, sg = 0, sgx = 0;
      for (std::int64_t q = 0; q < p; ++q) {
        const T gy = gs[base + q];
        const T xh = s.xhat[base + q];
        sg += gy;
        sgx += gy * xh;
      }
      sd = sg * gam[ch];
      sdx = sgx * gam[ch];
      sum_d[grp] += sd;
      sum_dx[grp] += sdx;
      dgamma[ch] += sgx;
      dbeta[ch] += sg;
    }
  }
  if (needs[0]) {
    std::vector<T> gx(static_cast<std::size_t>(n * c * p));
    const T inv_m = T(1) / static_cast<T>(group_size);
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const auto base = (i * c + ch) * p;
        const auto grp = group_of(i, ch);
        const T md = sum_d[grp] * inv_m;
        const T mdx = sum_dx[grp] * inv_m;
        const T is = s.inv_std[grp];
        for (std::int64_t q = 0; q < p; ++q) {
          const T dxh = gs[base + q] * gam[ch];
          gx[base + q] = is * (dxh - md - s.xhat[base + q] * mdx);
        }
      }
    }
    res[0] = Tensor::from(shape, std::move(gx));
  }
  if (needs[1]) res[1] = Tensor::from({c}, std::move(dgamma));
  if (needs[2]) res[2] = Tensor::from({c}, std::move(dbeta));
  return res;
}

}  // namespace

Var instance_norm(Var input, Var gamma, Var beta, double eps) {
  Graph& gr = same_graph({input, gamma, beta});
  const Tensor x = input.value();
  const Tensor gm = gamma.value();
  const Tensor bt = beta.value();
  check_norm_args(x, gm, bt, eps, "instance_norm");
  const auto n = x.dim(0), c = x.dim(1), p = x.dim(2) * x.dim(3);
  return dispatch(x.dtype(), [&]<class T>() {
    auto xs = view<T>(x);
    auto gs = view<T>(gm);
    auto bs = view<T>(bt);
    auto saved = std::make_shared<NormSaved<T>>();
    saved->xhat.resize(xs.size());
    saved->inv_std.resize(static_cast<std::size_t>(n * c));
    std::vector<T> y(xs.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t plane = 0; plane < n * c; ++plane) {
      const T* src = xs.data() + plane * p;
      T mu = 0;
      for (std::int64_t q = 0; q < p; ++q) mu += src[q];
      mu /= static_cast<T>(p);
      T var = 0;
      for (std::int64_t q = 0; q < p; ++q) var += (src[q] - mu) * (src[q] - mu);
      var /= static_cast<T>(p);
      const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
      saved->inv_std[plane] = is;
      const auto ch = plane % c;
      for (std::int64_t q = 0; q < p; ++q) {
        const T xh = (src[q] - mu) * is;
        saved->xhat[plane * p + q] = xh;
        y[plane * p + q] = gs[ch] * xh + bs[ch];
      }
    }
    Tensor out = Tensor::from(x.shape(), std::move(y));
    return gr.record("instance_norm", out, {input, gamma, beta},
                     [gm, saved, n, c, p, shape = x.shape()](const Tensor& go,
                                                              const std::vector<bool>& needs) {
                       return norm_backward<T>(
                           go, gm, *saved, n, c, p, n * c, p,
                           [c](std::int64_t i, std::int64_t ch) { return i * c + ch; }, needs,
                           shape);
                     });
  });
}

Var batch_norm_train(Var input, Var gamma, Var beta, double eps, BatchMoments* moments) {
  Graph& gr = same_graph({input, gamma, beta});
  const Tensor x = input.value();
  const Tensor gm = gamma.value();
  const Tensor bt = beta.value();
  check_norm_args(x, gm, bt, eps, "batch_norm");
  const auto n = x.dim(0), c = x.dim(1), p = x.dim(2) * x.dim(3);
  return dispatch(x.dtype(), [&]<class T>() {
    auto xs = view<T>(x);
    auto gs = view<T>(gm);
    auto bs = view<T>(bt);
    auto saved = std::make_shared<NormSaved<T>>();
    saved->xhat.resize(xs.size());
    saved->inv_std.resize(static_cast<std::size_t>(c));
    std::vector<T> mean(static_cast<std::size_t>(c));
    std::vector<T> var(static_cast<std::size_t>(c));
    const auto m = static_cast<T>(n * p);
#pragma omp parallel for schedule(static)
    for (std::int64_t ch = 0; ch < c; ++ch) {
      T mu = 0;
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t q = 0; q < p; ++q) mu += xs[(i * c + ch) * p + q];
      mu /= m;
      T v = 0;
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t q = 0; q < p; ++q) {
          const T d = xs[(i * c + ch) * p + q] - mu;
          v += d * d;
        }
      v /= m;
      mean[ch] = mu;
      var[ch] = v;
      saved->inv_std[ch] = T(1) / std::sqrt(v + static_cast<T>(eps));
    }
    std::vector<T> y(xs.size());
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t ch = 0; ch < c; ++ch) {
        for (std::int64_t q = 0; q < p; ++q) {
          const auto idx = (i * c + ch) * p + q;
          const T xh = (xs[idx] - mean[ch]) * saved->inv_std[ch];
          saved->xhat[idx] = xh;
          y[idx] = gs[ch] * xh + bs[ch];
        }
      }
    }
    if (moments != nullptr) {
      moments->mean = Tensor::from({c}, mean);
      moments->var = Tensor::from({c}, var);
    }
    Tensor out = Tensor::from(x.shape(), std::move(y));
    return gr.record("batch_norm_train", out, {input, gamma, beta},
                     [gm, saved, n, c, p, shape = x.shape()](const Tensor& go,
                                                              const std::vector<bool>& needs) {
                       return norm_backward<T>(
                           go, gm, *saved, n, c, p, c, n * p,
                           [](std::int64_t, std::int64_t ch) { return ch; }, needs, shape);
                     });
  });
}

Var batch_norm_eval(Var input, Var gamma, Var beta, const Tensor& mean, const Tensor& var,
                    double eps) {
  Graph& gr = same_graph({input, gamma, beta});
  const Tensor x = input.value();
  const Tensor gm = gamma.value();
  const Tensor bt = beta.value();
  check_norm_args(x, gm, bt, eps, "batch_norm");
  require_same_shape(gm, mean, "batch_norm running mean");
  require_same_shape(gm, var, "batch_norm running var");
  const auto n = x.dim(0), c = x.dim(1), p = x.dim(2) * x.dim(3);
  return dispatch(x.dtype(), [&]<class T>() {
    auto xs = view<T>(x);
    auto gs = view<T>(gm);
    auto bs = view<T>(bt);
    auto ms = view<T>(mean);
    auto vs = view<T>(var);
    std::vector<T> inv_std(static_cast<std::size_t>(c));
    for (std::int64_t ch = 0; ch < c; ++ch) inv_std[ch] = T(1) / std::sqrt(vs[ch] + static_cast<T>(eps));
    std::vector<T> xhat(xs.size());
    std::vector<T> y(xs.size());
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t ch = 0; ch < c; ++ch) {
        for (std::int64_t q = 0; q < p; ++q) {
          const auto idx = (i * c + ch) * p + q;
          xhat[idx] = (xs[idx] - ms[ch]) * inv_std[ch];
          y[idx] = gs[ch] * xhat[idx] + bs[ch];
        }
      }
    }
    Tensor out = Tensor::from(x.shape(), std::move(y));
    Tensor xh = Tensor::from(x.shape(), std::move(xhat));
    return gr.record(
        "batch_norm_eval", out, {input, gamma, beta},
        [gm, xh, inv_std, n, c, p](const Tensor& go, const std::vector<bool>& needs) {
          auto gs = view<T>(go);
          auto gam = view<T>(gm);
          auto xhs = view<T>(xh);
          std::vector<Tensor> res(3);
          std::vector<T> dgamma(static_cast<std::size_t>(c), T(0));
          std::vector<T> dbeta(static_cast<std::size_t>(c), T(0));
          std::vector<T> gx(needs[0] ? gs.size() : 0);
          for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t ch = 0; ch < c; ++ch)
              for (std::int64_t q = 0; q < p; ++q) {
                const auto idx = (i * c + ch) * p + q;
                dgamma[ch] += gs[idx] * xhs[idx];
                dbeta[ch] += gs[idx];
                if (needs[0]) gx[idx] = gs[idx] * gam[ch] * inv_std[ch];
              }
          if (needs[0]) res[0] = Tensor::from(xh.shape(), std::move(gx));
          if (needs[1]) res[1] = Tensor::from({c}, std::move(dgamma));
          if (needs[2]) res[2] = Tensor::from({c}, std::move(dbeta));
          return res;
        });
  });
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax_rows: expects N x D, got " + shape_string(logits.shape()));
  const auto n = logits.dim(0), d = logits.dim(1);
  return dispatch(logits.dtype(), [&]<class T>() {
    auto zs = view<T>(logits);
    std::vector<T> p(zs.size());
    for (std::int64_t i = 0; i < n; ++i) {
      const T* z = zs.data() + i * d;
      const T mx = *std::max_element(z, z + d);
      T s = 0;
      for (std::int64_t j = 0; j < d; ++j) {
        p[i * d + j] = std::exp(z[j] - mx);
        s += p[i * d + j];
      }
      for (std::int64_t j = 0; j < d; ++j) p[i * d + j] /= s;
    }
    return Tensor::from(logits.shape(), std::move(p));
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor z = logits.value();
  if (z.rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be N x K, got " + shape_string(z.shape()));
  const auto n = z.dim(0), k = z.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }
  for (auto l : labels) {
    if (l < 0 || l >= k) {
      throw ValueError("softmax_cross_entropy: label " + std::to_string(l) + " out of range [0, " +
                       std::to_string(k) + ")");
    }
  }
  std::vector<int> lab(labels.begin(), labels.end());
  const Tensor probs = softmax_rows(z);
  return dispatch(z.dtype(), [&]<class T>() {
    auto zs = view<T>(z);
    // Accumulate in double; loss = mean(logsumexp - z_label).
    double total = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const T* row = zs.data() + i * k;
      const T mx = *std::max_element(row, row + k);
      double s = 0.0;
      for (std::int64_t j = 0; j < k; ++j) s += std::exp(static_cast<double>(row[j] - mx));
      total += static_cast<double>(mx) + std::log(s) - static_cast<double>(row[lab[i]]);
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(n), z.dtype());
    return logits.graph().record(
        "softmax_cross_entropy", out, {logits},
        [probs, lab, n, k](const Tensor& go, const std::vector<bool>&) {
          auto ps = view<T>(probs);
          const T f = static_cast<T>(go.item() / static_cast<double>(n));
          std::vector<T> gz(ps.begin(), ps.end());
          for (std::int64_t i = 0; i < n; ++i) gz[i * k + lab[i]] -= T(1);
          for (auto& v : gz) v *= f;
          return std::vector<Tensor>{Tensor::from({n, k}, std::move(gz))};
        });
  });
}

Var soft_cross_entropy(Var logits, const Tensor& target) {
  const Tensor z = logits.value();
  require_same_shape(z, target, "soft_cross_entropy");
  if (z.rank() != 2) throw ShapeError("soft_cross_entropy: expects N x D");
  const auto n = z.dim(0), d = z.dim(1);
  const Tensor probs = softmax_rows(z);
  return dispatch(z.dtype(), [&]<class T>() {
    auto zs = view<T>(z);
    auto ts = view<T>(target);
    double total = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const T* row = zs.data() + i * d;
      const T mx = *std::max_element(row, row + d);
      double s = 0.0;
      for (std::int64_t j = 0; j < d; ++j) s += std::exp(static_cast<double>(row[j] - mx));
      const double lse = static_cast<double>(mx) + std::log(s);
      for (std::int64_t j = 0; j < d; ++j) {
        total -= static_cast<double>(ts[i * d + j]) * (static_cast<double>(row[j]) - lse);
      }
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(n), z.dtype());
    return logits.graph().record(
        "soft_cross_entropy", out, {logits},
        [probs, target, n, d](const Tensor& go, const std::vector<bool>&) {
          auto ps = view<T>(probs);
          auto ts = view<T>(target);
          const T f = static_cast<T>(go.item() / static_cast<double>(n));
          std::vector<T> gz(ps.size());
          // d/dz of -sum_j t_j log softmax_j = softmax * sum(t) - t.
          for (std::int64_t i = 0; i < n; ++i) {
            T tsum = 0;
            for (std::int64_t j = 0; j < d; ++j) tsum += ts[i * d + j];
            for (std::int64_t j = 0; j < d; ++j) {
              gz[i * d + j] = f * (ps[i * d + j] * tsum - ts[i * d + j]);
            }
          }
          return std::vector<Tensor>{Tensor::from({n, d}, std::move(gz))};
        });
  });
}

Var cosine_distance_rows(Var a, Var b) {
  Graph& gr = same_graph({a, b});
  const Tensor av = a.value();
  const Tensor bv = b.value();
  require_same_shape(av, bv, "cosine_distance_rows");
  const auto n = rows_of(av), d = cols_of(av);
  return dispatch(av.dtype(), [&]<class T>() {
    auto as = view<T>(av);
    auto bs = view<T>(bv);
    std::vector<double> dot(n), na(n), nb(n);
    double total = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      double s = 0, sa = 0, sb = 0;
      for (std::int64_t j = 0; j < d; ++j) {
        const double x = as[i * d + j], y = bs[i * d + j];
        s += x * y;
        sa += x * x;
        sb += y * y;
      }
      dot[i] = s;
      na[i] = std::sqrt(sa);
      nb[i] = std::sqrt(sb);
      total += (na[i] == 0.0 || nb[i] == 0.0) ? 1.0 : 1.0 - s / (na[i] * nb[i]);
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(n), av.dtype());
    return gr.record(
        "cosine_distance_rows", out, {a, b},
        [av, bv, dot, na, nb, n, d](const Tensor& go, const std::vector<bool>& needs) {
          auto as = view<T>(av);
          auto bs = view<T>(bv);
          const double f = go.item() / static_cast<double>(n);
          std::vector<T> ga(needs[0] ? as.size() : 0, T(0));
          std::vector<T> gb(needs[1] ? bs.size() : 0, T(0));
          for (std::int64_t i = 0; i < n; ++i) {
            if (na[i] == 0.0 || nb[i] == 0.0) continue;
            const double inv = 1.0 / (na[i] * nb[i]);
            const double cosv = dot[i] * inv;
            for (std::int64_t j = 0; j < d; ++j) {
              const double x = as[i * d + j], y = bs[i * d + j];
              // d(1 - cos)/dx = -(y / (|x||y|) - cos * x / |x|^2)
              if (needs[0]) ga[i * d + j] = static_cast<T>(-f * (y * inv - cosv * x / (na[i] * na[i])));
              if (needs[1]) gb[i * d + j] = static_cast<T>(-f * (x * inv - cosv * y / (nb[i] * nb[i])));
            }
          }
          std::vector<Tensor> res(2);
          if (needs[0]) res[0] = Tensor::from(av.shape(), std::move(ga));
          if (needs[1]) res[1] = Tensor::from(bv.shape(), std::move(gb));
          return res;
        });
  });
}

Var spatial_resample(Var input, const SpatialMap& map) {
  const Tensor x = input.value();
  if (x.rank() != 4 || x.dim(2) != map.in_h || x.dim(3) != map.in_w) {
    throw ShapeError("spatial_resample: map expects planes " + std::to_string(map.in_h) + "x" +
                     std::to_string(map.in_w) + ", got " + shape_string(x.shape()));
  }
  const auto planes = x.dim(0) * x.dim(1);
  const auto pin = map.in_h * map.in_w;
  const auto pout = map.out_h * map.out_w;
  auto shared = std::make_shared<const SpatialMap>(map);
  return dispatch(x.dtype(), [&]<class T>() {
    auto xs = view<T>(x);
    std::vector<T> y(static_cast<std::size_t>(planes * pout), T(0));
#pragma omp parallel for schedule(static)
    for (std::int64_t pl = 0; pl < planes; ++pl) {
      for (std::int64_t q = 0; q < pout; ++q) {
        T acc = 0;
        for (int t = 0; t < SpatialMap::kTaps; ++t) {
          const auto src = shared->sources[q * SpatialMap::kTaps + t];
          if (src >= 0) acc += static_cast<T>(shared->weights[q * SpatialMap::kTaps + t]) * xs[pl * pin + src];
        }
        y[pl * pout + q] = acc;
      }
    }
    Tensor out = Tensor::from({x.dim(0), x.dim(1), map.out_h, map.out_w}, std::move(y));
    return input.graph().record(
        "spatial_resample", out, {input},
        [shared, planes, pin, pout, shape = x.shape()](const Tensor& go, const std::vector<bool>&) {
          auto gs = view<T>(go);
          std::vector<T> gx(static_cast<std::size_t>(planes * pin), T(0));
#pragma omp parallel for schedule(static)
          for (std::int64_t pl = 0; pl < planes; ++pl) {
            for (std::int64_t q = 0; q < pout; ++q) {
              for (int t = 0; t < SpatialMap::kTaps; ++t) {
                const auto src = shared->sources[q * SpatialMap::kTaps + t];
                if (src >= 0) {
                  gx[pl * pin + src] +=
                      static_cast<T>(shared->weights[q * SpatialMap::kTaps + t]) * gs[pl * pout + q];
                }
              }
            }
          }
          return std::vector<Tensor>{Tensor::from(shape, std::move(gx))};
        });
  });
}

}  // namespace elfdd::ops

#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "elfdd/tensor/checkpoint.hpp"
#include "elfdd/tensor/kernels.hpp"
#include "elfdd/tensor/ops.hpp"
#include "elfdd/tensor/optim.hpp"
#include "elfdd/tensor/prng.hpp"

using namespace elfdd;

namespace {

Tensor f32(Shape s, std::vector<float> v) { return Tensor::from(std::move(s), std::move(v)); }

// Independent six-deep loop oracle for conv2d, written against raw indices.
std::vector<double> conv_oracle(const Tensor& x, const Tensor& w, int stride, int pad) {
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const auto o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const auto ho = (h + 2 * pad - kh) / stride + 1, wo = (wd + 2 * pad - kw) / stride + 1;
  std::vector<double> y(n * o * ho * wo, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < o; ++b)
      for (int i = 0; i < ho; ++i)
        for (int j = 0; j < wo; ++j)
          for (int ch = 0; ch < c; ++ch)
            for (int u = 0; u < kh; ++u)
              for (int v = 0; v < kw; ++v) {
                const int r = i * stride - pad + u, s = j * stride - pad + v;
                if (r < 0 || r >= h || s < 0 || s >= wd) continue;
                y[((a * o + b) * ho + i) * wo + j] +=
                    x.flat(((a * c + ch) * h + r) * wd + s) * w.flat(((b * c + ch) * kh + u) * kw + v);
              }
  return y;
}

}  // namespace

TEST_SUITE("prng") {
  TEST_CASE("same state gives the same value and advances") {
    PrngState s{0, 0};
    auto [a, s1] = prng_next_uniform(s);
    auto [b, s2] = prng_next_uniform(s);
    CHECK(a == b);
    CHECK(s1 == s2);
    CHECK_FALSE(s1 == s);
  }

  TEST_CASE("mean of 1e5 draws") {
    Rng rng(PrngState{0, 0});
    double total = 0.0;
    for (int i = 0; i < 100000; ++i) {
      const double u = rng.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      total += u;
    }
    const double mean = total / 1e5;
    CHECK(mean >= 0.495);
    CHECK(mean <= 0.505);
  }

  TEST_CASE("split streams from seed 7 differ pairwise") {
    const PrngState root{7, 0};
    Rng a(prng_split(root, 0));
    Rng b(prng_split(root, 1));
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() != b.uniform());
  }

  TEST_CASE("split is reproducible") {
    CHECK(prng_split({7, 3}, 11) == prng_split({7, 3}, 11));
    CHECK_FALSE(prng_split({7, 3}, 11) == prng_split({7, 4}, 11));
  }

  TEST_CASE("below is in range") {
    Rng rng(3);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
      auto v = rng.below(5);
      CHECK(v < 5);
      seen.insert(v);
    }
    CHECK(seen.size() == 5);
  }
}

TEST_SUITE("tensor") {
  TEST_CASE("element count matches shape") {
    CHECK_THROWS_AS(f32({2, 2}, {1, 2, 3}), ShapeError);
    auto t = Tensor::zeros({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.reshape({6, 4}).dim(0) == 6);
    CHECK_THROWS_AS(t.reshape({5, 5}), ShapeError);
  }

  TEST_CASE("mixing dtypes is an error") {
    Graph g;
    auto a = g.constant(Tensor::zeros({2}, DType::F32));
    auto b = g.constant(Tensor::zeros({2}, DType::F64));
    CHECK_THROWS_AS(ops::add(a, b), ShapeError);
    CHECK_THROWS_AS(Tensor::zeros({2}).data<double>(), ShapeError);
  }
}

TEST_SUITE("conv2d") {
  TEST_CASE("scalar kernel over ones") {
    Graph g;
    auto x = g.constant(Tensor::full({1, 1, 3, 3}, 1.0));
    auto w = g.constant(f32({1, 1, 1, 1}, {2}));
    auto y = ops::conv2d(x, w, 1, 0);
    CHECK(y.shape() == Shape{1, 1, 3, 3});
    for (auto v : y.value().data<float>()) CHECK(v == 2.0f);
  }

  TEST_CASE("full window sum") {
    Graph g;
    auto x = g.constant(f32({1, 1, 2, 2}, {1, 2, 3, 4}));
    auto w = g.constant(Tensor::full({1, 1, 2, 2}, 1.0));
    auto y = ops::conv2d(x, w, 1, 0);
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y.value().item() == 10.0);
  }

  TEST_CASE("strided padded conv matches loop oracle") {
    Rng rng(1);
    Tensor x = random_normal({2, 3, 8, 8}, rng);
    Tensor w = random_normal({4, 3, 3, 3}, rng);
    Graph g;
    auto y = ops::conv2d(g.constant(x), g.constant(w), 2, 1);
    CHECK(y.shape() == Shape{2, 4, 4, 4});
    auto oracle = conv_oracle(x, w, 2, 1);
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      CHECK(y.value().flat(static_cast<std::int64_t>(i)) == doctest::Approx(oracle[i]).epsilon(1e-5));
    }
    double worst = 0;
    for (std::size_t i = 0; i < oracle.size(); ++i)
      worst = std::max(worst, std::abs(y.value().flat(static_cast<std::int64_t>(i)) - oracle[i]));
    CHECK(worst <= 1e-5);
  }

  TEST_CASE("errors name the offending axes") {
    Graph g;
    auto x = g.constant(Tensor::zeros({1, 2, 4, 4}));
    auto w = g.constant(Tensor::zeros({1, 3, 3, 3}));
    try {
      ops::conv2d(x, w, 1, 0);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("C=2") != std::string::npos);
      CHECK(std::string(e.what()).find("I=3") != std::string::npos);
    }
    auto big = g.constant(Tensor::zeros({1, 2, 5, 5}));
    CHECK_THROWS_AS(ops::conv2d(x, big, 1, 0), ShapeError);
  }

  TEST_CASE("output shape formula for H <= 16") {
    Rng rng(5);
    for (std::int64_t h = 1; h <= 16; ++h)
      for (std::int64_t k = 1; k <= 5; ++k)
        for (std::int64_t stride = 1; stride <= 3; ++stride)
          for (std::int64_t pad = 0; pad <= 2; ++pad) {
            if (h + 2 * pad < k) {
              CHECK_THROWS_AS(conv_geometry({1, 1, h, h}, {1, 1, k, k}, stride, pad), ShapeError);
              continue;
            }
            auto geo = conv_geometry({1, 1, h, h}, {1, 1, k, k}, stride, pad);
            CHECK(geo.ho == (h + 2 * pad - k) / stride + 1);
            CHECK(geo.ho >= 1);
            // The realized output shape agrees with the formula.
            if (h <= 8) {
              Graph g;
              auto y = ops::conv2d(g.constant(random_normal({1, 1, h, h}, rng)),
                                   g.constant(random_normal({1, 1, k, k}, rng)), stride, pad);
              CHECK(y.shape()[2] == geo.ho);
            }
            if (k <= h) {
              auto pg = pool_geometry({1, 1, h, h}, k, stride);
              CHECK(pg.ho == (h - k) / stride + 1);
            }
          }
  }
}

TEST_SUITE("kernels vs reference") {
  TEST_CASE("conv forward and both backward paths agree") {
    Rng rng(2);
    for (int trial = 0; trial < 12; ++trial) {
      const std::int64_t n = 1 + rng.below(3), c = 1 + rng.below(4), o = 1 + rng.below(5);
      const std::int64_t h = 3 + rng.below(8), k = 1 + rng.below(3);
      const std::int64_t stride = 1 + rng.below(2), pad = rng.below(2);
      auto geo = conv_geometry({n, c, h, h}, {o, c, k, k}, stride, pad);
      auto x = random_normal({n, c, h, h}, rng, 1.0, DType::F64).to_vector();
      auto w = random_normal({o, c, k, k}, rng, 1.0, DType::F64).to_vector();
      auto gy = random_normal({n, o, geo.ho, geo.wo}, rng, 1.0, DType::F64).to_vector();
      std::vector<double> y1(gy.size()), y2(gy.size()), gx1(x.size()), gx2(x.size()),
          gw1(w.size()), gw2(w.size());
      kernels::conv2d_forward<double>(geo, x, w, y1);
      reference::conv2d_forward<double>(geo, x, w, y2);
      kernels::conv2d_backward_input<double>(geo, gy, w, gx1);
      reference::conv2d_backward_input<double>(geo, gy, w, gx2);
      kernels::conv2d_backward_weight<double>(geo, gy, x, gw1);
      reference::conv2d_backward_weight<double>(geo, gy, x, gw2);
      for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-12));
      for (std::size_t i = 0; i < gx1.size(); ++i) CHECK(gx1[i] == doctest::Approx(gx2[i]).epsilon(1e-12));
      for (std::size_t i = 0; i < gw1.size(); ++i) CHECK(gw1[i] == doctest::Approx(gw2[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("pooling and gemm agree") {
    Rng rng(4);
    auto geo = pool_geometry({2, 3, 6, 6}, 2, 2);
    auto x = random_normal({2, 3, 6, 6}, rng).to_vector();
    std::vector<float> xf(x.begin(), x.end()), y1(2 * 3 * 9), y2(2 * 3 * 9);
    kernels::avg_pool_forward<float>(geo, xf, y1);
    reference::avg_pool_forward<float>(geo, xf, y2);
    for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-6));
    std::vector<std::int64_t> a1(y1.size()), a2(y1.size());
    kernels::max_pool_forward<float>(geo, xf, y1, a1);
    reference::max_pool_forward<float>(geo, xf, y2, a2);
    CHECK(y1 == y2);
    CHECK(a1 == a2);

    for (bool ta : {false, true})
      for (bool tb : {false, true}) {
        auto a = random_normal({5, 7}, rng, 1.0, DType::F64).to_vector();
        auto b = random_normal({7, 3}, rng, 1.0, DType::F64).to_vector();
        std::vector<double> c1(15), c2(15);
        // Shapes are chosen so every transpose combination is valid for 5x7 * 7x3.
        const std::int64_t m = 5, n = 3, k = 7;
        std::vector<double> at = a, bt = b;
        if (ta)
          for (int i = 0; i < m; ++i)
            for (int l = 0; l < k; ++l) at[l * m + i] = a[i * k + l];
        if (tb)
          for (int l = 0; l < k; ++l)
            for (int j = 0; j < n; ++j) bt[j * k + l] = b[l * n + j];
        kernels::gemm<double>(ta, tb, m, n, k, at, bt, c1);
        reference::gemm<double>(ta, tb, m, n, k, at, bt, c2);
        for (int i = 0; i < 15; ++i) CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-12));
      }
  }
}

TEST_SUITE("layer ops") {
  TEST_CASE("avg_pool examples") {
    Graph g;
    auto c = ops::avg_pool2d(g.constant(Tensor::full({1, 2, 4, 4}, 3.5)), 2, 2);
    for (auto v : c.value().data<float>()) CHECK(v == 3.5f);
    auto y = ops::avg_pool2d(g.constant(f32({1, 1, 2, 2}, {1, 2, 3, 4})), 2, 2);
    CHECK(y.value().item() == 2.5);
    CHECK_THROWS_AS(ops::avg_pool2d(g.constant(Tensor::zeros({1, 1, 2, 2})), 3, 1), ShapeError);
  }

  TEST_CASE("avg_pool matches loop oracle") {
    Rng rng(8);
    Tensor x = random_normal({1, 2, 6, 6}, rng);
    Graph g;
    auto y = ops::avg_pool2d(g.constant(x), 2, 2).value();
    CHECK(y.shape() == Shape{1, 2, 3, 3});
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double s = 0;
          for (int u = 0; u < 2; ++u)
            for (int v = 0; v < 2; ++v) s += x.flat((c * 6 + 2 * i + u) * 6 + 2 * j + v);
          CHECK(std::abs(y.flat((c * 3 + i) * 3 + j) - s / 4) <= 1e-6);
        }
  }

  TEST_CASE("linear examples") {
    Graph g;
    auto id = g.constant(f32({2, 2}, {1, 0, 0, 1}));
    auto x = g.constant(f32({2, 2}, {3, -1, 0.5f, 2}));
    auto y = ops::linear(x, id, g.constant(Tensor::zeros({2})));
    CHECK(y.value().bit_equal(x.value()));
    auto z = ops::linear(g.constant(f32({1, 2}, {1, 2})), g.constant(f32({2, 1}, {1, 1})),
                         g.constant(f32({1}, {3})));
    CHECK(z.value().item() == 6.0);
    CHECK_THROWS_AS(ops::linear(x, g.constant(Tensor::zeros({3, 1})), g.constant(Tensor::zeros({1}))),
                    ShapeError);
  }

  TEST_CASE("linear matches loop oracle") {
    Rng rng(9);
    Tensor x = random_normal({4, 8}, rng), w = random_normal({8, 5}, rng), b = random_normal({5}, rng);
    Graph g;
    auto y = ops::linear(g.constant(x), g.constant(w), g.constant(b)).value();
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 5; ++j) {
        double s = b.flat(j);
        for (int l = 0; l < 8; ++l) s += x.flat(i * 8 + l) * w.flat(l * 5 + j);
        CHECK(std::abs(y.flat(i * 5 + j) - s) <= 1e-5);
      }
  }

  TEST_CASE("relu values and gradients") {
    Graph g;
    auto y = ops::relu(g.constant(f32({3}, {-1, 0, 2})));
    CHECK(y.value().to_vector() == std::vector<double>{0, 0, 2});

    Graph g2;
    auto neg = g2.leaf(f32({3}, {-1, -2, -0.5f}));
    auto out = ops::relu(neg);
    for (auto v : out.value().data<float>()) CHECK(v == 0.0f);
    auto grads = g2.backward(ops::sum(out));
    for (auto v : grads.of(neg).data<float>()) CHECK(v == 0.0f);

    Graph g3;
    auto x = g3.leaf(f32({2}, {-1, 3}));
    auto gr = g3.backward(ops::sum(ops::relu(x)));
    CHECK(gr.of(x).to_vector() == std::vector<double>{0, 1});
  }

  TEST_CASE("softmax cross entropy") {
    Graph g;
    for (int label : {0, 1}) {
      int lab[] = {label};
      auto l = ops::softmax_cross_entropy(g.constant(f32({1, 2}, {0, 0})), lab);
      CHECK(l.value().item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    }
    int zero[] = {0};
    CHECK(ops::softmax_cross_entropy(g.constant(f32({1, 2}, {10, -10})), zero).value().item() < 1e-4);
    int bad[] = {2};
    CHECK_THROWS_AS(ops::softmax_cross_entropy(g.constant(f32({1, 2}, {0, 0})), bad), ValueError);
  }

  TEST_CASE("softmax cross entropy matches f64 direct formula") {
    Rng rng(10);
    Tensor z = random_normal({3, 5}, rng, 3.0);
    const int labels[] = {4, 0, 2};
    Graph g;
    const double got = ops::softmax_cross_entropy(g.constant(z), labels).value().item();
    double expect = 0;
    for (int i = 0; i < 3; ++i) {
      double s = 0;
      for (int j = 0; j < 5; ++j) s += std::exp(z.flat(i * 5 + j));
      expect += -std::log(std::exp(z.flat(i * 5 + labels[i])) / s);
    }
    CHECK(std::abs(got - expect / 3) <= 1e-6);
  }
}

TEST_SUITE("backward") {
  TEST_CASE("sum gives ones") {
    Graph g;
    auto x = g.leaf(Tensor::full({2, 2}, 0.3));
    auto grads = g.backward(ops::sum(x));
    for (auto v : grads.of(x).data<float>()) CHECK(v == 1.0f);
  }

  TEST_CASE("power rule") {
    Graph g;
    auto x = g.leaf(f32({1}, {3}));
    auto grads = g.backward(ops::sum(ops::mul(x, x)));
    CHECK(grads.of(x).item() == 6.0);
  }

  TEST_CASE("non-scalar root is an error") {
    Graph g;
    auto x = g.leaf(Tensor::zeros({2}));
    CHECK_THROWS_AS(g.backward(ops::relu(x)), ShapeError);
  }

  TEST_CASE("unreachable leaves get zero and constants get nothing") {
    Graph g;
    auto a = g.leaf(Tensor::full({2}, 1.0), "a");
    g.leaf(Tensor::full({3}, 1.0), "b");
    auto c = g.constant(Tensor::full({2}, 2.0));
    auto grads = g.backward(ops::sum(ops::mul(a, c)));
    CHECK(grads["a"].to_vector() == std::vector<double>{2, 2});
    CHECK(grads["b"].to_vector() == std::vector<double>{0, 0, 0});
    CHECK_FALSE(c.requires_grad());
    CHECK_THROWS_AS(grads.of(c), ValueError);
  }

  TEST_CASE("duplicate leaf names are rejected") {
    Graph g;
    g.leaf(Tensor::zeros({1}), "w");
    CHECK_THROWS_AS(g.leaf(Tensor::zeros({1}), "w"), ValueError);
  }

  TEST_CASE("backward of a * loss scales gradients exactly in f64") {
    Rng rng(12);
    Tensor x = random_normal({2, 3, 5, 5}, rng, 1.0, DType::F64);
    Tensor w = random_normal({4, 3, 3, 3}, rng, 1.0, DType::F64);
    Graph g;
    auto xv = g.leaf(x);
    auto wv = g.leaf(w);
    auto loss = ops::mean(ops::square(ops::relu(ops::conv2d(xv, wv, 1, 1))));
    const auto base = g.backward(loss, 1.0);
    for (double a : {0.0, 1.0, 2.0}) {
      const auto scaled = g.backward(loss, a);
      for (auto v : {xv, wv}) {
        auto s = scaled.of(v).to_vector();
        auto b = base.of(v).to_vector();
        for (std::size_t i = 0; i < s.size(); ++i) REQUIRE(s[i] == a * b[i]);
      }
    }
  }
}

TEST_SUITE("sgd") {
  TEST_CASE("plain step") {
    TensorMap p{{"w", f32({1}, {1})}}, g{{"w", f32({1}, {2})}}, v;
    sgd_momentum_step(p, g, v, 0.1, 0.0);
    CHECK(p["w"].item() == doctest::Approx(0.8));
  }

  TEST_CASE("zero gradient leaves params unchanged") {
    TensorMap p{{"w", f32({2}, {1, -3})}}, g{{"w", Tensor::zeros({2})}}, v;
    sgd_momentum_step(p, g, v, 0.1, 0.9);
    CHECK(p["w"].to_vector() == std::vector<double>{1, -3});
  }

  TEST_CASE("two momentum steps") {
    TensorMap p{{"w", Tensor::zeros({1}, DType::F64)}}, g{{"w", Tensor::full({1}, 1.0, DType::F64)}}, v;
    sgd_momentum_step(p, g, v, 0.01, 0.9);
    sgd_momentum_step(p, g, v, 0.01, 0.9);
    CHECK(p["w"].item() == doctest::Approx(-0.029).epsilon(1e-12));
  }

  TEST_CASE("shape mismatch") {
    TensorMap p{{"w", Tensor::zeros({2})}}, g{{"w", Tensor::zeros({3})}}, v;
    CHECK_THROWS_AS(sgd_momentum_step(p, g, v, 0.1, 0.9), ShapeError);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("bit-exact round trip") {
    Rng rng(13);
    for (DType dt : {DType::F32, DType::F64}) {
      NamedTensors ts{{"conv.w", random_normal({4, 3, 3, 3}, rng, 1.0, dt)},
                      {"héad", random_normal({7}, rng, 1.0, dt)}};
      std::stringstream buf;
      write_checkpoint(buf, ts);
      auto back = read_checkpoint(buf);
      REQUIRE(back.size() == 2);
      for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].first == ts[i].first);
        CHECK(back[i].second.bit_equal(ts[i].second));
      }
    }
  }

  TEST_CASE("bad magic and truncation are format errors") {
    std::stringstream bad("XXXX\x01\x00");
    CHECK_THROWS_AS(read_checkpoint(bad), FormatError);
    std::stringstream buf;
    write_checkpoint(buf, {{"w", Tensor::full({4}, 1.0)}});
    std::string s = buf.str();
    std::stringstream cut(s.substr(0, s.size() - 3));
    CHECK_THROWS_AS(read_checkpoint(cut), FormatError);
  }

  TEST_CASE("byte layout") {
    std::stringstream buf;
    write_checkpoint(buf, {{"a", f32({1}, {1.0f})}});
    const std::string s = buf.str();
    // magic(4) version(2) dtype(1) count(4) namelen(4) name(1) rank(4) dim(4) data(4)
    REQUIRE(s.size() == 28);
    CHECK(s.substr(0, 4) == "ELFT");
    CHECK(static_cast<unsigned char>(s[4]) == 1);
    CHECK(static_cast<unsigned char>(s[6]) == 0);
    CHECK(static_cast<unsigned char>(s[27]) == 0x3f);
    CHECK(static_cast<unsigned char>(s[26]) == 0x80);
  }
}

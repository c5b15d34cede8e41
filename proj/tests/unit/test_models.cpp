#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "elfdd/core/error.hpp"
#include "elfdd/nn/model.hpp"
#include "elfdd/tensor/ops.hpp"
#include "support/gradcheck.hpp"

using namespace elfdd;
using namespace elfdd::nn;

namespace {

ModelConfig make(Family f, int depth, int width, Norm norm, std::int64_t hw, DType dt = DType::F32) {
  ModelConfig c;
  c.family = f;
  c.depth = depth;
  c.width = width;
  c.norm = norm;
  c.num_classes = 10;
  c.input_shape = {3, hw, hw};
  c.dtype = dt;
  return c;
}

Tensor batch(std::int64_t n, std::int64_t hw, std::uint64_t seed, DType dt = DType::F32) {
  Rng rng(seed);
  return random_uniform({n, 3, hw, hw}, rng, 0.0, 1.0, dt);
}

// Per-channel mean and biased variance over N, H, W.
std::pair<std::vector<double>, std::vector<double>> channel_moments(const Tensor& x) {
  const auto n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < hw; ++p) mean[ch] += x.flat((i * c + ch) * hw + p);
    mean[ch] /= static_cast<double>(n * hw);
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < hw; ++p) {
        const double d = x.flat((i * c + ch) * hw + p) - mean[ch];
        var[ch] += d * d;
      }
    var[ch] /= static_cast<double>(n * hw);
  }
  return {mean, var};
}

std::int64_t conv_params(std::int64_t in, std::int64_t out, std::int64_t k, bool bias) {
  return in * out * k * k + (bias ? out : 0);
}

}  // namespace

TEST_CASE("ConvNet depth 3 width 128 on 3x32x32") {
  auto cfg = make(Family::ConvNet, 3, 128, Norm::InstanceNorm, 32);
  CHECK(num_feature_blocks(cfg) == 3);
  CHECK(block_output_shape(cfg, 3) == std::array<std::int64_t, 3>{128, 4, 4});
  // conv+bias, IN affine per block, then a 2048 -> 10 linear head.
  const std::int64_t expect = conv_params(3, 128, 3, true) + 256 + 2 * (conv_params(128, 128, 3, true) + 256) +
                              128 * 16 * 10 + 10;
  CHECK(param_count(cfg) == expect);
  CHECK(param_count(cfg) == 320010);
  auto m = build_model(cfg, {1, 0});
  CHECK(feature_tap(m, batch(1, 32, 3), 3).shape() == Shape{1, 128, 4, 4});
}

TEST_CASE("ConvNet width 256 tap at block 3") {
  auto cfg = make(Family::ConvNet, 3, 256, Norm::InstanceNorm, 32);
  auto m = build_model(cfg, {2, 0});
  CHECK(feature_tap(m, batch(1, 32, 4), 3).shape() == Shape{1, 256, 4, 4});
}

TEST_CASE("parameter counts of the residual and VGG families") {
  auto r = make(Family::MiniResNet, 18, 64, Norm::BatchNorm, 32);
  // Bias-free convs, BN affine, 1x1 projection shortcuts at stage changes.
  std::int64_t expect = conv_params(3, 64, 3, false) + 128;
  std::int64_t in = 64;
  for (int stage = 0; stage < 4; ++stage) {
    const std::int64_t out = 64 << stage;
    for (int b = 0; b < 2; ++b) {
      expect += conv_params(in, out, 3, false) + 2 * out + conv_params(out, out, 3, false) + 2 * out;
      if (in != out) expect += conv_params(in, out, 1, false) + 2 * out;
      in = out;
    }
  }
  expect += 512 * 10 + 10;
  CHECK(param_count(r) == expect);
  CHECK(param_count(r) == 11173962);

  auto v = make(Family::MiniVGG, 11, 8, Norm::InstanceNorm, 16);
  const std::int64_t widths[] = {8, 16, 32, 32, 64, 64, 64, 64};
  std::int64_t ve = 0, vin = 3;
  for (auto w : widths) {
    ve += conv_params(vin, w, 3, true) + 2 * w;
    vin = w;
  }
  ve += 64 * 10 + 10;  // 16 -> 8 -> 4 -> 2 -> 1, last pool skipped
  CHECK(param_count(v) == ve);
}

TEST_CASE("build is deterministic in the seed") {
  auto cfg = make(Family::MiniResNet, 18, 4, Norm::BatchNorm, 16);
  auto a = build_model(cfg, {7, 0});
  auto b = build_model(cfg, {7, 0});
  auto c = build_model(cfg, {8, 0});
  bool any_diff = false;
  for (const auto& [name, t] : a.params) {
    CHECK(t.bit_equal(b.params.at(name)));
    if (!t.bit_equal(c.params.at(name))) any_diff = true;
  }
  CHECK(any_diff);
  CHECK(a.bn_stats.size() == b.bn_stats.size());
  CHECK_FALSE(a.bn_stats.empty());
  CHECK(build_model(make(Family::ConvNet, 3, 4, Norm::InstanceNorm, 16), {1, 0}).bn_stats.empty());
}

TEST_CASE("initialization follows the fan-in rule") {
  auto m = build_model(make(Family::ConvNet, 3, 16, Norm::InstanceNorm, 16), {1, 0});
  const double bound = 1.0 / std::sqrt(3.0 * 9.0);
  double worst = 0;
  for (auto v : m.params.at("block1.conv.weight").to_vector()) worst = std::max(worst, std::abs(v));
  CHECK(worst <= bound);
  CHECK(worst > 0.9 * bound);
  for (auto v : m.params.at("block2.norm.gamma").to_vector()) CHECK(v == 1.0);
  for (auto v : m.params.at("block2.norm.beta").to_vector()) CHECK(v == 0.0);
}

TEST_CASE("unsupported configurations") {
  CHECK_THROWS_AS(build_model(make(Family::MiniResNet, 34, 8, Norm::BatchNorm, 16), {}), ConfigError);
  CHECK_THROWS_AS(build_model(make(Family::ConvNet, 9, 8, Norm::BatchNorm, 16), {}), ConfigError);
  CHECK_THROWS_AS(build_model(make(Family::ConvNet, 3, 0, Norm::BatchNorm, 16), {}), ConfigError);
  CHECK_THROWS_AS(build_model(make(Family::ConvNet, 5, 8, Norm::BatchNorm, 16), {}), ConfigError);
}

TEST_CASE("MiniResNet-BN on 3x16x16 returns finite logits") {
  auto m = build_model(make(Family::MiniResNet, 18, 4, Norm::BatchNorm, 16), {3, 0});
  for (Mode mode : {Mode::Train, Mode::Eval}) {
    auto y = forward(m, batch(5, 16, 1), mode);
    CHECK(y.shape() == Shape{5, 10});
    CHECK(all_finite(y));
  }
}

TEST_CASE("zero head gives zero logits") {
  auto m = build_model(make(Family::ConvNet, 3, 8, Norm::InstanceNorm, 16), {4, 0});
  m.params["head.weight"] = Tensor::zeros(m.params["head.weight"].shape());
  m.params["head.bias"] = Tensor::zeros({10});
  for (std::uint64_t s = 0; s < 3; ++s) {
    for (auto v : forward(m, batch(2, 16, s), Mode::Eval).to_vector()) CHECK(v == 0.0);
  }
}

TEST_CASE("eval forward is pure") {
  auto m = build_model(make(Family::MiniVGG, 11, 4, Norm::BatchNorm, 16), {5, 0});
  auto x = batch(3, 16, 2);
  auto y1 = forward(m, x, Mode::Eval);
  auto y2 = forward(m, x, Mode::Eval);
  CHECK(y1.bit_equal(y2));
}

TEST_CASE("train forward mutates only BN stats") {
  auto m = build_model(make(Family::ConvNet, 3, 8, Norm::BatchNorm, 16), {5, 0});
  const auto before = m.params;
  const auto stats_before = m.bn_stats.at("block1.norm").mean;
  forward(m, batch(4, 16, 9), Mode::Train);
  for (const auto& [name, t] : before) CHECK(t.bit_equal(m.params.at(name)));
  CHECK_FALSE(stats_before.bit_equal(m.bn_stats.at("block1.norm").mean));
  for (const auto& [layer, s] : m.bn_stats)
    for (auto v : s.var.to_vector()) CHECK(v >= 0.0);
}

TEST_CASE("BN running-stat recursion in f64") {
  auto cfg = make(Family::ConvNet, 1, 4, Norm::BatchNorm, 8, DType::F64);
  auto m = build_model(cfg, {6, 0});
  const double k = m.bn_momentum;
  CHECK(k == 0.1);
  std::vector<double> rm(4, 0.0), rv(4, 1.0);
  for (std::uint64_t step = 0; step < 3; ++step) {
    auto x = batch(3, 8, 20 + step, DType::F64);
    // The pre-norm activation: standardized input through the block conv.
    Graph g;
    auto v = x.to_vector();
    for (auto& e : v) e = (e - 0.5) / 0.25;
    Tensor z = Tensor::from(x.shape(), v);
    auto pre = ops::bias_add(ops::conv2d(g.constant(z), g.constant(m.params.at("block1.conv.weight")), 1, 1),
                             g.constant(m.params.at("block1.conv.bias")))
                   .value();
    auto [mu, var] = channel_moments(pre);
    for (int c = 0; c < 4; ++c) {
      rm[c] = (1 - k) * rm[c] + k * mu[c];
      rv[c] = (1 - k) * rv[c] + k * var[c];
    }
    forward(m, x, Mode::Train);
    auto got_m = m.bn_stats.at("block1.norm").mean.to_vector();
    auto got_v = m.bn_stats.at("block1.norm").var.to_vector();
    for (int c = 0; c < 4; ++c) {
      CHECK(got_m[c] == doctest::Approx(rm[c]).epsilon(1e-12));
      CHECK(got_v[c] == doctest::Approx(rv[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("instance norm examples") {
  Graph g;
  auto ones = g.constant(Tensor::full({3}, 1.0));
  auto zeros = g.constant(Tensor::zeros({3}));
  std::vector<float> cst(2 * 3 * 4 * 4);
  for (std::size_t i = 0; i < cst.size(); ++i) cst[i] = static_cast<float>(i / 16);
  auto y = ops::instance_norm(g.constant(Tensor::from({2, 3, 4, 4}, cst)), ones, zeros, 1e-5);
  for (auto v : y.value().data<float>()) CHECK(v == 0.0f);

  Rng rng(1);
  auto x = g.constant(random_normal({2, 3, 4, 4}, rng, 3.0));
  auto beta = Tensor::from({3}, std::vector<float>{0.5f, -1, 2});
  auto yb = ops::instance_norm(x, zeros, g.constant(beta), 1e-5).value();
  for (std::int64_t i = 0; i < yb.numel(); ++i) CHECK(yb.flat(i) == beta.flat((i / 16) % 3));

  auto yn = ops::instance_norm(x, ones, zeros, 1e-5).value();
  for (int s = 0; s < 6; ++s) {
    double mu = 0, var = 0;
    for (int p = 0; p < 16; ++p) mu += yn.flat(s * 16 + p);
    mu /= 16;
    for (int p = 0; p < 16; ++p) var += (yn.flat(s * 16 + p) - mu) * (yn.flat(s * 16 + p) - mu);
    var /= 16;
    CHECK(std::abs(mu) <= 1e-5);
    CHECK(std::abs(var - 1) <= 1e-3);
  }
  CHECK_THROWS_AS(ops::instance_norm(x, ones, zeros, 0.0), ValueError);
  CHECK_THROWS_AS(ops::instance_norm(x, g.constant(Tensor::zeros({2})), zeros, 1e-5), ShapeError);
}

TEST_CASE("batch norm examples") {
  Graph g;
  Rng rng(2);
  auto ones = g.constant(Tensor::full({3}, 1.0));
  auto zeros = g.constant(Tensor::zeros({3}));
  Tensor xt = random_normal({4, 3, 3, 3}, rng, 2.0);
  ops::BatchMoments mom;
  auto y = ops::batch_norm_train(g.constant(xt), ones, zeros, 1e-5, &mom).value();
  auto [mu, var] = channel_moments(y);
  for (int c = 0; c < 3; ++c) {
    CHECK(std::abs(mu[c]) <= 1e-5);
    CHECK(std::abs(var[c] - 1) <= 1e-3);
  }
  auto [xm, xv] = channel_moments(xt);
  for (int c = 0; c < 3; ++c) {
    CHECK(mom.mean.flat(c) == doctest::Approx(xm[c]).epsilon(1e-5));
    CHECK(mom.var.flat(c) == doctest::Approx(xv[c]).epsilon(1e-4));
  }

  // Momentum 1 copies the last batch moments into the running stats.
  auto m = build_model(make(Family::ConvNet, 3, 4, Norm::BatchNorm, 16), {1, 0});
  m.bn_momentum = 1.0;
  auto x = batch(5, 16, 3);
  forward(m, x, Mode::Train);
  auto snapshot = m.bn_stats;
  forward(m, x, Mode::Train);
  for (const auto& [layer, s] : m.bn_stats) {
    CHECK(s.mean.bit_equal(snapshot.at(layer).mean));
    CHECK(s.var.bit_equal(snapshot.at(layer).var));
  }

  // Train statistics differ from the running ones used in Eval.
  auto m2 = build_model(make(Family::ConvNet, 3, 4, Norm::BatchNorm, 16), {1, 0});
  auto tr = forward(m2, x, Mode::Train);
  auto ev = forward(m2, x, Mode::Eval);
  CHECK(max_abs_diff(tr, ev) > 1e-4);
}

TEST_CASE("instance norm models ignore the mode") {
  auto m = build_model(make(Family::MiniResNet, 18, 4, Norm::InstanceNorm, 16), {9, 0});
  auto x = batch(3, 16, 4);
  CHECK(forward(m, x, Mode::Train).bit_equal(forward(m, x, Mode::Eval)));
}

TEST_CASE("front and rear compose to the full model") {
  const std::vector<ModelConfig> configs = {
      make(Family::ConvNet, 3, 8, Norm::InstanceNorm, 16), make(Family::ConvNet, 4, 8, Norm::BatchNorm, 16),
      make(Family::MiniResNet, 18, 4, Norm::BatchNorm, 16), make(Family::MiniResNet, 18, 4, Norm::InstanceNorm, 16),
      make(Family::MiniVGG, 11, 4, Norm::InstanceNorm, 16), make(Family::MiniVGG, 11, 4, Norm::BatchNorm, 16)};
  for (const auto& cfg : configs) {
    CAPTURE(cfg.name());
    auto m = build_model(cfg, {11, 0});
    if (cfg.norm == Norm::BatchNorm) forward(m, batch(8, 16, 77), Mode::Train);
    auto x = batch(100, 16, 12);
    auto full = forward(m, x, Mode::Eval);
    for (int sp = 1; sp <= num_feature_blocks(cfg); ++sp) {
      auto [front, rear] = split_model(m, {sp});
      auto mid = front.run(x, Mode::Eval);
      CHECK(max_abs_diff(rear.run(mid, Mode::Eval), full) <= 1e-6);
      CHECK(mid.bit_equal(feature_tap(m, x, sp)));
      // Disjoint and exhaustive parameter partition.
      auto fn = front.param_names(), rn = rear.param_names();
      std::set<std::string> all(fn.begin(), fn.end());
      for (const auto& n : rn) CHECK(all.insert(n).second);
      CHECK(all.size() == m.params.size());
    }
    CHECK_THROWS_AS(split_model(m, {0}), ConfigError);
    CHECK_THROWS_AS(split_model(m, {num_feature_blocks(cfg) + 1}), ConfigError);
  }
}

TEST_CASE("ConvNet depth 3 split 2 matches tap at block 2") {
  auto m = build_model(make(Family::ConvNet, 3, 8, Norm::InstanceNorm, 16), {1, 0});
  auto [front, rear] = split_model(m, {2});
  auto x = batch(2, 16, 5);
  CHECK(front.run(x, Mode::Eval).shape() == feature_tap(m, x, 2).shape());
  CHECK(front.run(x, Mode::Eval).shape() == Shape{2, 8, 4, 4});
}

TEST_CASE("named split points") {
  for (int w : {64, 8}) {
    auto r = make(Family::MiniResNet, 18, w, Norm::BatchNorm, 32);
    auto sp = resolve_split(r, "conv5_2-analog");
    CHECK(sp.block_index == 8);
    CHECK(block_output_shape(r, sp.block_index)[0] == 512 * w / 64);
  }
  auto r = make(Family::MiniResNet, 18, 8, Norm::BatchNorm, 32);
  auto m = build_model(r, {1, 0});
  auto [front, rear] = split_model(m, resolve_split(r, "conv5_2-analog"));
  CHECK(front.run(batch(1, 32, 1), Mode::Eval).shape() == Shape{1, 64, 4, 4});
  CHECK(resolve_split(r, "conv5_1b").block_index == 8);
  CHECK_THROWS_AS(resolve_split(r, "conv5_1a"), ConfigError);
  CHECK_THROWS_AS(resolve_split(r, "conv4_2a"), ConfigError);
  CHECK_THROWS_AS(resolve_split(r, "nonsense"), ConfigError);

  auto v = make(Family::MiniVGG, 11, 8, Norm::InstanceNorm, 16);
  CHECK(resolve_split(v, "layer5").block_index == 5);
  CHECK(resolve_split(v, "layer6").block_index == 6);
  CHECK(block_output_shape(v, 5) == std::array<std::int64_t, 3>{64, 2, 2});
  CHECK(default_split(v).block_index == 5);
  CHECK_THROWS_AS(resolve_split(v, "conv5_2-analog"), ConfigError);
  CHECK(resolve_split(make(Family::ConvNet, 3, 8, Norm::InstanceNorm, 16), "block2").block_index == 2);
}

TEST_CASE("tap at the last block feeds the head") {
  auto m = build_model(make(Family::ConvNet, 3, 8, Norm::InstanceNorm, 16), {1, 0});
  auto x = batch(3, 16, 5);
  auto tap = feature_tap(m, x, 3);
  Graph g;
  auto logits = ops::linear(ops::flatten(g.constant(tap)), g.constant(m.params.at("head.weight")),
                            g.constant(m.params.at("head.bias")));
  CHECK(logits.value().bit_equal(forward(m, x, Mode::Eval)));
  CHECK_THROWS_AS(feature_tap(m, x, 0), ValueError);
  CHECK_THROWS_AS(feature_tap(m, x, 4), ValueError);
}

TEST_CASE("sections alias the parent parameters") {
  auto m = build_model(make(Family::ConvNet, 3, 8, Norm::InstanceNorm, 16), {1, 0});
  auto [front, rear] = split_model(m, {3});
  auto x = batch(2, 16, 5);
  auto before = rear.run(front.run(x, Mode::Eval), Mode::Eval);
  m.params["head.bias"] = add(m.params["head.bias"], Tensor::full({10}, 1.0));
  auto after = rear.run(front.run(x, Mode::Eval), Mode::Eval);
  for (std::int64_t i = 0; i < after.numel(); ++i) CHECK(after.flat(i) == doctest::Approx(before.flat(i) + 1));
}

TEST_CASE("input validation and NaN diagnostics") {
  auto m = build_model(make(Family::ConvNet, 3, 8, Norm::InstanceNorm, 16), {1, 0});
  CHECK_THROWS_AS(forward(m, batch(1, 8, 1), Mode::Eval), ShapeError);
  auto w = m.params["block2.conv.weight"].to_vector();
  w[0] = std::nan("");
  m.params["block2.conv.weight"] = Tensor::from(m.params["block2.conv.weight"].shape(), w).to(DType::F32);
  try {
    forward(m, batch(1, 16, 1), Mode::Eval);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("block2") != std::string::npos);
  }
}

TEST_CASE("model checkpoint round trip") {
  auto m = build_model(make(Family::MiniResNet, 18, 4, Norm::BatchNorm, 16), {1, 0});
  forward(m, batch(4, 16, 2), Mode::Train);
  const auto path = std::filesystem::temp_directory_path() / "elfdd_test_model.elft";
  save_model(path, m);
  auto back = load_model(path);
  CHECK(back.config.name() == m.config.name());
  for (const auto& [n, t] : m.params) CHECK(t.bit_equal(back.params.at(n)));
  for (const auto& [n, s] : m.bn_stats) {
    CHECK(s.mean.bit_equal(back.bn_stats.at(n).mean));
    CHECK(s.var.bit_equal(back.bn_stats.at(n).var));
  }
  auto x = batch(2, 16, 3);
  CHECK(forward(m, x, Mode::Eval).bit_equal(forward(back, x, Mode::Eval)));
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".json");
}

TEST_CASE("model gradients agree with finite differences") {
  const std::vector<ModelConfig> configs = {make(Family::ConvNet, 2, 3, Norm::InstanceNorm, 8, DType::F64),
                                            make(Family::MiniResNet, 18, 2, Norm::BatchNorm, 8, DType::F64),
                                            make(Family::MiniVGG, 11, 2, Norm::InstanceNorm, 8, DType::F64)};
  for (const auto& cfg : configs) {
    CAPTURE(cfg.name());
    auto m = build_model(cfg, {3, 0});
    std::vector<Tensor> inputs{batch(2, 8, 4, DType::F64), m.params.at("head.weight")};
    const int labels[] = {1, 7};
    auto loss = [&](Graph& g, const std::vector<Var>& v) {
      Binding p = bind(g, m, false);
      p.set("head.weight", v[1]);
      return ops::softmax_cross_entropy(forward(g, m, p, v[0], Mode::Train), labels);
    };
    CHECK(elfdd::testing::gradcheck(loss, inputs, 1e-6, 60) <= 1e-3);
  }
}

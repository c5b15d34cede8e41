// OpenMP kernels against the serial reference loops, on the layer shapes
// the models use. Run with OMP_NUM_THREADS to vary the thread count.

#include <omp.h>

#include <vector>

#include <benchmark/benchmark.h>

#include "elfdd/tensor/kernels.hpp"
#include "elfdd/tensor/prng.hpp"

using namespace elfdd;

namespace {

std::vector<float> random_buffer(std::int64_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = static_cast<float>(rng.uniform() - 0.5);
  return v;
}

// args: batch, channels in, channels out, spatial size; 3x3, stride 1, pad 1.
ConvGeometry geometry(const benchmark::State& s) {
  return conv_geometry({s.range(0), s.range(1), s.range(3), s.range(3)}, {s.range(2), s.range(1), 3, 3}, 1, 1);
}

void label(benchmark::State& s, const ConvGeometry& g) {
  const double flops = 2.0 * g.n * g.o * g.ho * g.wo * g.c * g.kh * g.kw;
  s.counters["GFLOP/s"] = benchmark::Counter(flops * static_cast<double>(s.iterations()) / 1e9,
                                             benchmark::Counter::kIsRate);
  s.counters["threads"] = omp_get_max_threads();
}

template <bool Fast>
void conv_forward(benchmark::State& s) {
  const auto g = geometry(s);
  const auto x = random_buffer(g.n * g.c * g.h * g.w, 1);
  const auto w = random_buffer(g.o * g.c * g.kh * g.kw, 2);
  std::vector<float> y(static_cast<std::size_t>(g.n * g.o * g.ho * g.wo));
  for (auto _ : s) {
    if constexpr (Fast) kernels::conv2d_forward<float>(g, x, w, y);
    else reference::conv2d_forward<float>(g, x, w, y);
    benchmark::DoNotOptimize(y.data());
  }
  label(s, g);
}

template <bool Fast>
void conv_backward_input(benchmark::State& s) {
  const auto g = geometry(s);
  const auto gy = random_buffer(g.n * g.o * g.ho * g.wo, 3);
  const auto w = random_buffer(g.o * g.c * g.kh * g.kw, 2);
  std::vector<float> gx(static_cast<std::size_t>(g.n * g.c * g.h * g.w));
  for (auto _ : s) {
    if constexpr (Fast) kernels::conv2d_backward_input<float>(g, gy, w, gx);
    else reference::conv2d_backward_input<float>(g, gy, w, gx);
    benchmark::DoNotOptimize(gx.data());
  }
  label(s, g);
}

template <bool Fast>
void conv_backward_weight(benchmark::State& s) {
  const auto g = geometry(s);
  const auto gy = random_buffer(g.n * g.o * g.ho * g.wo, 3);
  const auto x = random_buffer(g.n * g.c * g.h * g.w, 1);
  std::vector<float> gw(static_cast<std::size_t>(g.o * g.c * g.kh * g.kw));
  for (auto _ : s) {
    if constexpr (Fast) kernels::conv2d_backward_weight<float>(g, gy, x, gw);
    else reference::conv2d_backward_weight<float>(g, gy, x, gw);
    benchmark::DoNotOptimize(gw.data());
  }
  label(s, g);
}

template <bool Fast>
void gemm(benchmark::State& s) {
  const std::int64_t n = s.range(0);
  const auto a = random_buffer(n * n, 4), b = random_buffer(n * n, 5);
  std::vector<float> c(static_cast<std::size_t>(n * n));
  for (auto _ : s) {
    if constexpr (Fast) kernels::gemm<float>(false, false, n, n, n, a, b, c);
    else reference::gemm<float>(false, false, n, n, n, a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  s.counters["GFLOP/s"] = benchmark::Counter(2.0 * n * n * n * static_cast<double>(s.iterations()) / 1e9,
                                             benchmark::Counter::kIsRate);
  s.counters["threads"] = omp_get_max_threads();
}

template <bool Fast>
void max_pool(benchmark::State& s) {
  const auto g = pool_geometry({s.range(0), s.range(1), s.range(2), s.range(2)}, 2, 2);
  const auto x = random_buffer(g.n * g.c * g.h * g.w, 6);
  std::vector<float> y(static_cast<std::size_t>(g.n * g.c * g.ho * g.wo));
  std::vector<std::int64_t> arg(y.size());
  for (auto _ : s) {
    if constexpr (Fast) kernels::max_pool_forward<float>(g, x, y, arg);
    else reference::max_pool_forward<float>(g, x, y, arg);
    benchmark::DoNotOptimize(y.data());
  }
  s.counters["threads"] = omp_get_max_threads();
}

// Toy ConvNet-3-w64 first block, a MiniResNet stage, a CIFAR ConvNet-w128 block.
void conv_shapes(benchmark::internal::Benchmark* b) {
  b->Args({64, 3, 64, 16})->Args({64, 16, 16, 8})->Args({32, 128, 128, 32})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(conv_forward<true>)->Name("conv_forward/omp")->Apply(conv_shapes);
BENCHMARK(conv_forward<false>)->Name("conv_forward/serial")->Apply(conv_shapes);
BENCHMARK(conv_backward_input<true>)->Name("conv_backward_input/omp")->Apply(conv_shapes);
BENCHMARK(conv_backward_input<false>)->Name("conv_backward_input/serial")->Apply(conv_shapes);
BENCHMARK(conv_backward_weight<true>)->Name("conv_backward_weight/omp")->Apply(conv_shapes);
BENCHMARK(conv_backward_weight<false>)->Name("conv_backward_weight/serial")->Apply(conv_shapes);
BENCHMARK(gemm<true>)->Name("gemm/omp")->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(gemm<false>)->Name("gemm/serial")->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(max_pool<true>)->Name("max_pool/omp")->Args({64, 64, 16})->Args({32, 128, 32});
BENCHMARK(max_pool<false>)->Name("max_pool/serial")->Args({64, 64, 16})->Args({32, 128, 32});

BENCHMARK_MAIN();

#include "elfdd/tensor/prng.hpp"

#include <cmath>
#include <numbers>

namespace elfdd {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kSplitSalt = 0xD1B54A32D192ED03ULL;
}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::pair<std::uint64_t, PrngState> prng_next_u64(PrngState state) {
  const std::uint64_t value = mix64(state.seed + (state.counter + 1) * kGolden);
  ++state.counter;
  return {value, state};
}

std::pair<double, PrngState> prng_next_uniform(PrngState state) {
  auto [bits, next] = prng_next_u64(state);
  return {static_cast<double>(bits >> 11) * 0x1.0p-53, next};
}

PrngState prng_split(PrngState state, std::uint64_t tag) {
  const std::uint64_t child = mix64(mix64(state.seed ^ kSplitSalt) + mix64(tag + kGolden) +
                                    state.counter * kGolden);
  return {child, 0};
}

std::uint64_t Rng::next_u64() {
  auto [v, s] = prng_next_u64(state_);
  state_ = s;
  return v;
}

double Rng::uniform() {
  auto [v, s] = prng_next_uniform(state_);
  state_ = s;
  return v;
}

double Rng::normal() {
  // Box-Muller; u1 in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ValueError("Rng::below(0)");
  // Rejection keeps the result unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

Tensor random_uniform(const Shape& shape, Rng& rng, double lo, double hi, DType dtype) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  return dispatch(dtype, [&]<class T>() {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
    return Tensor::from(shape, std::move(v));
  });
}

Tensor random_normal(const Shape& shape, Rng& rng, double stddev, DType dtype) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  return dispatch(dtype, [&]<class T>() {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(stddev * rng.normal());
    return Tensor::from(shape, std::move(v));
  });
}

}  // namespace elfdd

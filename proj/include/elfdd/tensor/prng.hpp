#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "elfdd/tensor/tensor.hpp"

namespace elfdd {

/// Counter-based generator state.
///
/// The i-th output of a stream is SplitMix64's finalizer applied to
/// seed + (i + 1) * 0x9E3779B97F4A7C15, i.e. exactly the SplitMix64 sequence
/// started at `seed`. Because each value depends only on (seed, counter), a
/// stream can be resumed anywhere and reproduces on any platform.
struct PrngState {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  friend bool operator==(const PrngState&, const PrngState&) = default;
};

std::uint64_t mix64(std::uint64_t x);

/// Raw 64-bit output at the current position and the advanced state.
std::pair<std::uint64_t, PrngState> prng_next_u64(PrngState state);
/// Uniform double in [0, 1) with 53 random bits.
std::pair<double, PrngState> prng_next_uniform(PrngState state);

/// Child stream keyed by `tag`. Children with distinct tags (or split from
/// distinct parent positions) are independent; the parent is not advanced.
PrngState prng_split(PrngState state, std::uint64_t tag);

/// Mutable convenience wrapper over PrngState for sampling loops.
class Rng {
 public:
  explicit Rng(PrngState state) : state_(state) {}
  explicit Rng(std::uint64_t seed) : state_{seed, 0} {}

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool coin() { return (next_u64() >> 63) != 0; }

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  PrngState state() const { return state_; }
  Rng split(std::uint64_t tag) const { return Rng(prng_split(state_, tag)); }

 private:
  PrngState state_;
};

/// Tensor of i.i.d. U[lo, hi) values.
Tensor random_uniform(const Shape& shape, Rng& rng, double lo = 0.0, double hi = 1.0,
                      DType dtype = DType::F32);
/// Tensor of i.i.d. N(0, stddev^2) values.
Tensor random_normal(const Shape& shape, Rng& rng, double stddev = 1.0, DType dtype = DType::F32);

}  // namespace elfdd

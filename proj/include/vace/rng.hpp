// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "vace/tensor.hpp"

namespace vace {

/// SplitMix64 finalizer (Steele, Lea & Flood). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: word i of stream `key` is mix64(key + (i + 1) * golden).
///
/// Stream contract (algorithm id "splitmix64-ctr/1"):
///   uniform()  = (word >> 11) * 2^-53, in [0, 1)
///   normal()   = Box-Muller cosine branch on two consecutive words:
///                u1 = ((w0 >> 11) + 1) * 2^-53 in (0, 1], u2 = uniform(w1),
///                z  = sqrt(-2 ln u1) * cos(2 pi u2), evaluated in double.
/// Each normal() consumes exactly two words; the sine branch is discarded.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64-ctr/1";
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t counter = 0) noexcept
      : key_(seed), counter_(counter) {}

  std::uint64_t seed() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept { return mix64(key_ + (++counter_) * kGolden); }

  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Integer in [lo, hi] inclusive, by multiply-shift on the top 32 bits.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    const std::uint64_t top = next_u64() >> 32;
    return lo + static_cast<std::int64_t>((top * span) >> 32);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  double normal() noexcept {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Independent child stream. Children of distinct `stream` ids never share keys
  /// with each other (mix64 is a bijection), and do not depend on the parent counter.
  Rng split(std::uint64_t stream) const noexcept { return Rng(derive_seed(key_, stream)); }

  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
  }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

/// i.i.d. standard normal tensor drawn from `rng` in row-major order.
template <typename T = float>
BasicTensor<T> normal(Rng& rng, const Shape& shape) {
  BasicTensor<T> out(shape);
  for (auto& v : out.data()) v = static_cast<T>(rng.normal());
  return out;
}

template <typename T = float>
BasicTensor<T> uniform(Rng& rng, const Shape& shape, double lo, double hi) {
  BasicTensor<T> out(shape);
  for (auto& v : out.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return out;
}

}  // namespace vace

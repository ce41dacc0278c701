#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "spiked/core.hpp"

namespace spiked {

/// SplitMix64 finalizer. Used to turn (seed, index) pairs into decorrelated stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Substream seed for `index` under `parent`. Depends only on its arguments, so trial
/// k draws the same numbers whether trials run serially or on a worker pool.
constexpr Seed derive(Seed parent, std::uint64_t index) noexcept {
  return Seed{splitmix64(splitmix64(parent.value) ^ splitmix64(index + 0x632be59bd9b4e019ULL))};
}

/// Fixed-purpose substreams of a trial seed.
enum class Stream : std::uint64_t { Noise = 1, EigenStart = 2, Init = 3, Covariance = 4 };

constexpr Seed derive(Seed parent, Stream s) noexcept {
  return derive(parent, static_cast<std::uint64_t>(s) << 56);
}

/// Portable random source. The engine (mt19937_64) is fully specified by the standard;
/// uniform and Gaussian conversions are done here rather than by <random> distributions,
/// whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(Seed seed) : engine_(splitmix64(seed.value)) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal by the Box-Muller transform. Draws come in pairs; the second
  /// value of each pair is returned by the next call.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Vector of i.i.d. standard normals.
template <typename Scalar = double>
Vector<Scalar> standard_normal_vector(Index n, Seed seed) {
  Rng rng(seed);
  Vector<Scalar> v(n);
  for (Index i = 0; i < n; ++i) v[i] = static_cast<Scalar>(rng.normal());
  return v;
}

}  // namespace spiked

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "pnp/vec.hpp"

namespace pnp {

/**
 * Deterministic counter-based pseudo-random stream.
 *
 * Each output is a hash of (seed, counter), so equal seeds give byte-identical
 * sequences on every platform. Distribution samplers (normal, poisson) are
 * implemented here rather than taken from <random> because the standard leaves
 * their algorithms unspecified, which would break cross-platform reproducibility.
 */
class SamplerRng {
 public:
  explicit SamplerRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(seed_ + counter_ * 0x9E3779B97F4A7C15ull);
  }

  /// Independent child stream; tag picks the stream.
  SamplerRng fork(std::string_view tag) const {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (char c : tag) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return SamplerRng(mix(seed_ ^ h));
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), unbiased (Lemire multiply-shift with rejection).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw InputError("uniform_index: n must be positive");
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t t = -n % n;
      while (lo < t) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via Box-Muller.
  double normal() {
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Poisson sample; Knuth for small rates, PTRS transformed rejection otherwise.
  std::int64_t poisson(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw InputError("poisson: rate must be finite and nonnegative");
    if (lambda == 0.0) return 0;
    if (lambda < 30.0) {
      const double limit = std::exp(-lambda);
      std::int64_t k = 0;
      double p = 1.0;
      do {
        ++k;
        p *= uniform();
      } while (p > limit);
      return k - 1;
    }
    return poisson_ptrs(lambda);
  }

  Vec normal_vec(std::size_t n) {
    Vec v(n);
    for (double& x : v) x = normal();
    return v;
  }

  /// Random unit vector (Gaussian direction).
  Vec unit_vec(std::size_t n) {
    Vec v = normal_vec(n);
    const double nv = norm(v);
    if (nv > 0) scale(v, 1.0 / nv);
    return v;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Hormann's PTRS rejection sampler, exact for lambda >= ~10.
  std::int64_t poisson_ptrs(double lambda) {
    const double log_lambda = std::log(lambda);
    const double b = 0.931 + 2.53 * std::sqrt(lambda);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::fabs(u);
      const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
          kf * log_lambda - lambda - std::lgamma(kf + 1.0))
        return static_cast<std::int64_t>(kf);
    }
  }

  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace pnp

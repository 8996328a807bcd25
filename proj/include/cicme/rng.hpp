#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>

namespace cicme {

// splitmix64 finalizer: cheap 64-bit mixer with full avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Folds a path of integers (experiment id, sample size, repeat index,
// domain, variable, ...) into a master seed so that every coordinate of a
// sweep owns an independent, reproducible stream.  Changing any path
// element or the master seed decorrelates the stream.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(master ^ 0x5851f42d4c957f2dull);
  for (std::uint64_t p : path) s = mix64(s ^ mix64(p));
  return s;
}

// Salts distinguishing the purpose of a derived stream.
namespace seed_path {
inline constexpr std::uint64_t dataset = 0x11;
inline constexpr std::uint64_t domain_params = 0x12;
inline constexpr std::uint64_t domain_samples = 0x13;
inline constexpr std::uint64_t cut_choice = 0x14;
inline constexpr std::uint64_t pooled_init = 0x21;
inline constexpr std::uint64_t domain_init = 0x22;
inline constexpr std::uint64_t hsic_perm = 0x23;
}  // namespace seed_path

// Deterministic random stream.  The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the uniform and normal mappings are
// spelled out here instead of using std::*_distribution so that draws are
// bit-identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1): top 53 bits of one engine draw.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.  Both draws of a pair are consumed and
  // one is discarded: no cached state, so interleaving calls with other
  // draws cannot reorder the stream.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();  // log(0) guard; probability 2^-53
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  // Uniform integer on [lo, hi], unbiased via rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
    std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(engine_());  // full span
    std::uint64_t reject_below = (0 - range) % range;
    for (;;) {
      std::uint64_t x = engine_();
      if (x >= reject_below) return lo + static_cast<std::int64_t>(x % range);
    }
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cicme

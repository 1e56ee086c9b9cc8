// Seeded randomness.  All draws flow through Rng, and independent
// sub-streams are derived from (seed, tag) with a splitmix64-style hash,
// so every pipeline stage (parameter draws, masks, contamination, ...)
// is reproducible from a single base seed regardless of thread count.
//
// std::mt19937_64 is fully specified by the standard; the distributions
// here are hand-rolled because the std distribution objects are not,
// and byte-identical reruns are part of the contract.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace femimpute {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Independent stream seed for (seed, tag); mix twice so adjacent seeds
// and adjacent tags land far apart.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(mix64(seed + 0x9e3779b97f4a7c15ull) ^
               (tag + 0x632be59bd9b4e019ull));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed + 0x9e3779b97f4a7c15ull)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return double(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via the Marsaglia polar method; keeps one spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // Chi-square with integer dof as a sum of squared normals; exact and
  // cheap at the dof this library needs.
  double chi_squared(int dof) {
    double s = 0.0;
    for (int i = 0; i < dof; ++i) {
      const double z = normal();
      s += z * z;
    }
    return s;
  }

  // Uniform integer on [0, n); rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace femimpute

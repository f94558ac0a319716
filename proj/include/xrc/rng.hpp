#pragma once

#include <cstdint>
#include <random>

#include "xrc/tensor.hpp"

namespace xrc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Deterministic generator with portable derived values: raw draws come
/// from mt19937_64 and are mapped to floats/ranges by fixed arithmetic,
/// so sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  i64 uniform_int(i64 n) {
    if (n <= 0) fail("uniform_int: n must be positive, got ", n);
    return static_cast<i64>((static_cast<unsigned __int128>(next()) *
                             static_cast<unsigned __int128>(n)) >>
                            64);
  }

  /// Independent stream derived from the original seed, not the current
  /// state, so forks are stable regardless of prior draw count.
  Rng fork(std::uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ (0xa0761d6478bd642full * (stream + 1))));
  }

  template <typename T>
  void fill_uniform(Tensor<T>& t, double lo, double hi) {
    for (i64 i = 0; i < t.numel(); ++i) {
      t.data()[i] = static_cast<T>(uniform(lo, hi));
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace xrc

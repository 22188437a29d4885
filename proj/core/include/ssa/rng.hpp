#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace ssa {

/// Seeded generator used for initialization, shuffling and data synthesis.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The distributions are implemented here rather than taken from
/// <random> (whose algorithms are implementation-defined) so that every
/// stream is bit-reproducible across standard libraries:
///   uniform()  = (next() >> 11) * 2^-53, in [0, 1)
///   normal()   = Box-Muller on two uniforms, second variate cached
///   below(n)   = rejection sampling on the top bits, unbiased
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename U>
  void shuffle(std::span<U> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  /// Independent child stream, e.g. one per sample, derived with splitmix64.
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ssa

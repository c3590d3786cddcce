#ifndef COMMREC_RNG_HPP
#define COMMREC_RNG_HPP

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace commrec {

/// 64-bit FNV-1a; used for config hashes and per-stage seed forking.
std::uint64_t fnv1a(std::string_view bytes);

/// Derives an independent seed for a named stage from a root seed.
std::uint64_t fork_seed(std::uint64_t seed, std::string_view stage);

/// Seeded generator with explicitly defined draw procedures.
///
/// The standard distributions are implementation-defined, so every draw
/// here is spelled out on top of the raw mt19937_64 stream. That keeps
/// outputs stable across standard libraries for a fixed seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n must be positive.
  std::size_t below(std::size_t n);

  bool bernoulli(double p) { return uniform() < p; }

  /// Knuth multiplication method; adequate for the small means used here.
  int poisson(double mean);

  /// Index drawn proportionally to nonnegative weights.
  std::size_t categorical(std::span<const double> weights);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  /// k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace commrec

#endif  // COMMREC_RNG_HPP

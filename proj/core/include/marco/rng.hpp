#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace marco {

/// Seedable random source with platform-stable output.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are not, so every conversion to
/// doubles and bounded integers is done here:
///   uniform()  : top 53 bits of one draw scaled by 2^-53, in [0, 1)
///   below(n)   : Lemire's multiply-shift with rejection, unbiased in [0, n)
/// Seeds for sub-streams (per instance, per thread) are derived with
/// splitmix64 so that one root seed fans out deterministically.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n);
  int range(int lo, int hi_inclusive);
  bool bernoulli(double p) { return uniform() < p; }

  /// Index drawn with probability proportional to `weights` (all >= 0, sum > 0).
  std::size_t categorical(std::span<const double> weights);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Hierarchical seed derivation: derive_seed(root, a, b) is a stable hash of the path.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0);

}  // namespace marco

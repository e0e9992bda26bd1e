#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace miltag {

// Portable random source. The engine is std::mt19937_64, whose output stream
// is fixed by the standard. All derived variates are computed here rather
// than through <random> distributions, whose algorithms are left to the
// library vendor; this keeps generated datasets and initializations
// bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [0, bound), bound > 0, rejection sampled (unbiased).
  std::uint64_t below(std::uint64_t bound);
  // Uniform integer on [lo, hi], inclusive.
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  // Standard normal via the Box-Muller transform. Pairs are cached.
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace miltag

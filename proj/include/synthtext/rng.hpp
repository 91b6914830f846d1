#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace synthtext {

// Deterministic RNG. std::mt19937_64 has a standardized output sequence;
// the distribution code lives here so results match across standard
// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Draws an index from unnormalized non-negative weights.
  std::size_t categorical(const std::vector<double>& weights);

 private:
  std::mt19937_64 gen_;
};

std::uint64_t fnv1a64(std::string_view s);

// Fans a master seed out to a per-stage seed.
std::uint64_t stage_seed(std::uint64_t master, std::string_view stage);

}  // namespace synthtext

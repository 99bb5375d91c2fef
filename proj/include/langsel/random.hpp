#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "langsel/error.hpp"

namespace langsel {

// SplitMix64, seeded directly with the user seed. Output is bit-exact on every
// platform (unsigned 64-bit wraparound only).
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

 private:
  std::uint64_t state_;
};

// Partial Fisher-Yates over the pool in ascending code order: position i swaps with
// i + (next() % (size - i)) for the first n positions, which are returned in
// ascending order. The modulo draw is kept for reproducibility of recorded
// subsets even though it carries a ~size/2^64 bias.
inline std::vector<std::string> sample_random(std::vector<std::string> pool, std::size_t n,
                                              std::uint64_t seed) {
  if (n > pool.size()) {
    throw infeasible_error("random subset of size " + std::to_string(n) + " requested from a pool of " +
                           std::to_string(pool.size()));
  }
  std::sort(pool.begin(), pool.end());
  SplitMix64 gen(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t remaining = pool.size() - i;
    const std::size_t j = i + static_cast<std::size_t>(gen() % remaining);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace langsel

#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace mtssrp {

/// Engine used for sequential random streams (Thompson draws, random plans).
using Rng = std::mt19937_64;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based seed splitting. The child seed depends only on the parent
/// and the keys, never on the order in which children are requested, so
/// replications give the same result however they are scheduled.
constexpr std::uint64_t derive_seed(std::uint64_t parent) noexcept { return parent; }

template <class... Keys>
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t key, Keys... rest) noexcept {
  return derive_seed(mix64(parent ^ mix64(key)), static_cast<std::uint64_t>(rest)...);
}

/// SplitMix64 as a UniformRandomBitGenerator. Cheap to construct, which is
/// what keyed (stateless) sampling needs.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t state) noexcept : state_(state) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Standard normal deviate that is a pure function of (seed, a, b).
inline double keyed_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  SplitMix64 gen(derive_seed(seed, a, b));
  std::normal_distribution<double> normal;
  return normal(gen);
}

/// Uniform integer in [0, n) that is a pure function of (seed, a, b).
inline std::uint64_t keyed_index(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t n) {
  SplitMix64 gen(derive_seed(seed, a, b));
  std::uniform_int_distribution<std::uint64_t> pick(0, n - 1);
  return pick(gen);
}

}  // namespace mtssrp

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <random>

namespace homfluct {

/// SplitMix64 output function (Steele, Lea & Flood).
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive a child seed from a master seed and a list of integer keys.
///
/// The result is a pure function of its arguments, so a stream identified by
/// (master, keys...) is reproduced exactly no matter which worker creates it
/// or in which order streams are created.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

/// Stream tags keep seeds for different purposes disjoint.
enum class StreamTag : std::uint64_t {
  field = 1,
  path = 2,
  pilot = 3,
  poisson_cell = 4,
  identity = 5,
  limit_law = 6,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, StreamTag tag,
                                    std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = derive_seed(master, {static_cast<std::uint64_t>(tag)});
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

template <class Range>
constexpr std::uint64_t derive_seed_range(std::uint64_t master, StreamTag tag,
                                          const Range& keys) noexcept {
  std::uint64_t h = derive_seed(master, {static_cast<std::uint64_t>(tag)});
  for (auto k : keys)
    h = splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(k) + 0x632be59bd9b4e019ULL));
  return h;
}

/// Counter-based SplitMix64 generator with the usual sampling helpers.
///
/// Satisfies UniformRandomBitGenerator, so standard distributions work with it.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1].
  double uniform_open0() noexcept {
    return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
  }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // Box-Muller keeps the sequence identical across standard libraries.
    const double u1 = uniform_open0();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t poisson(double mean) {
    std::poisson_distribution<std::uint64_t> dist(mean);
    return dist(*this);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace homfluct

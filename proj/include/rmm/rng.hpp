#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace rmm {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  constexpr explicit SplitMix64(std::uint64_t state) noexcept : state_(state) {}

  constexpr result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

 private:
  std::uint64_t state_;
};

/// xoshiro256** 1.0 (Blackman & Vigna). Satisfies
/// std::uniform_random_bit_generator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  constexpr explicit Xoshiro256(std::uint64_t seed) noexcept {
    SplitMix64 sm(seed);
    for (auto& w : s_) w = sm();
  }

  constexpr result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  friend constexpr bool operator==(const Xoshiro256&, const Xoshiro256&) = default;

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
};

/// Identifies one reproducible random stream.
///
/// The generator for (master_seed, stream_id) is xoshiro256** whose four
/// state words are consecutive SplitMix64 outputs started from
/// `mix64(master_seed ^ 0x6A09E667F3BCC909) ^ mix64(stream_id)`.
/// Distinct stream ids give unrelated states; nothing depends on which
/// thread, or in which order, a stream is consumed.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  friend constexpr bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

constexpr Xoshiro256 make_generator(SeedSpec seed) noexcept {
  return Xoshiro256(mix64(seed.master_seed ^ 0x6A09E667F3BCC909ULL) ^ mix64(seed.stream_id));
}

/// Uniform double in the open interval (0, 1): the 52-bit grid k / 2^52
/// shifted by half a step. Both (0.5) 2^-52 and 1 - 2^-53 are exact, so
/// neither endpoint is reachable.
template <class Gen>
double uniform_open(Gen& g) {
  return (static_cast<double>(g() >> 12) + 0.5) * 0x1.0p-52;
}

/// Unit-rate exponential by inversion; strictly positive.
template <class Gen>
double exponential(Gen& g) {
  return -std::log(uniform_open(g));
}

/// Standard normal by Box-Muller (one variate per two uniforms, no caching,
/// so the stream position is a pure function of the number of draws).
template <class Gen>
double standard_normal(Gen& g) {
  const double u1 = uniform_open(g);
  const double u2 = uniform_open(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rmm

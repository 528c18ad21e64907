#pragma once

// SplitMix64 streams.
//
// Generator: state advances by the golden-ratio increment 0x9E3779B97F4A7C15
// and each output is the SplitMix64 finalizer of the new state:
//
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   z =  z ^ (z >> 31)
//
// uniform() maps the top 53 bits of an output to [0, 1): (x >> 11) * 2^-53.
// normal() is the Box-Muller cosine branch on two consecutive uniforms
// (u1 replaced by 1 - u1 so the logarithm never sees zero).
//
// Independent streams come from derive(seed, a, b, c): starting from
// h = mix(seed), each coordinate is folded in as h = mix(h ^ mix(coord)),
// where mix(x) is the finalizer applied to x + 0x9E3779B97F4A7C15. The
// resulting h is the initial state of the stream. Rollouts use
// (seed, step, task_index, rollout_index) so results do not depend on the
// order in which rollouts are generated.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace grpo {

class SplitMix64 {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit constexpr SplitMix64(std::uint64_t state = 0) noexcept : state_(state) {}

  static constexpr std::uint64_t finalize(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t mix(std::uint64_t x) noexcept { return finalize(x + kGamma); }

  static constexpr SplitMix64 derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                     std::uint64_t c = 0) noexcept {
    std::uint64_t h = mix(seed);
    h = mix(h ^ mix(a));
    h = mix(h ^ mix(b));
    h = mix(h ^ mix(c));
    return SplitMix64(h);
  }

  constexpr std::uint64_t next() noexcept {
    state_ += kGamma;
    return finalize(state_);
  }

  constexpr double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double normal() noexcept {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n) by multiply-shift on the top 32 bits.
  constexpr std::uint64_t below(std::uint64_t n) noexcept {
    return ((next() >> 32) * n) >> 32;
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

  // std::uniform_random_bit_generator
  using result_type = std::uint64_t;
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  constexpr result_type operator()() noexcept { return next(); }

 private:
  std::uint64_t state_;
};

}  // namespace grpo

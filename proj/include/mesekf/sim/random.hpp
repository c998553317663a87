#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mesekf::sim {

/// Independent noise streams of one trial.
enum class StreamId : std::uint64_t {
  kInitial = 1,
  kOdometry = 2,
  kPose = 3,
  kRange = 4,
};

/// Counter-based normal generator. Every draw is a pure function of
/// (seed, trial, stream, index, component), so streams do not depend on the
/// order in which samples or trials are evaluated.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t trial) : seed_(seed), trial_(trial) {}

  /// Uniform in the open interval (0, 1).
  double uniform(StreamId stream, std::uint64_t index, std::uint64_t component) const {
    std::uint64_t h = mix(seed_ ^ 0x9E3779B97F4A7C15ULL);
    h = mix(h ^ trial_);
    h = mix(h ^ (static_cast<std::uint64_t>(stream) << 56));
    h = mix(h ^ index);
    h = mix(h ^ (component * 0xD1B54A32D192ED03ULL));
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on two keyed uniforms.
  double normal(StreamId stream, std::uint64_t index, std::uint64_t component) const {
    const double u1 = uniform(stream, index, 2 * component);
    const double u2 = uniform(stream, index, 2 * component + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  // SplitMix64 finaliser.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t trial_;
};

}  // namespace mesekf::sim

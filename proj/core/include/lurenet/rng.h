#pragma once

// Seedable random streams. Every realization of a Monte Carlo ensemble owns
// independent streams derived from (seed, realization, stream id), so results
// do not depend on how realizations are scheduled across threads.

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "lurenet/model.h"

namespace lurenet {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// SplitMix64 generator; satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = uint64_t;

  explicit SplitMix64(uint64_t state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

 private:
  uint64_t state_;
};

enum class StreamId : uint64_t {
  kInputChannel = 1,   // gamma
  kOutputChannel = 2,  // xi
  kProcessNoise = 3,
  kSampling = 4,
};

SplitMix64 derive_stream(uint64_t seed, uint64_t realization, StreamId id);

/// Source of per-step channel bits: either Bernoulli draws from a derived
/// stream or an explicit replayed sequence.
class ChannelSource {
 public:
  static ChannelSource Seeded(double p, uint64_t seed, uint64_t realization,
                              StreamId id);
  static ChannelSource Scripted(std::vector<uint8_t> bits);

  /// Next channel state. Scripted sources throw std::out_of_range when
  /// exhausted.
  bool next();

  bool scripted() const { return scripted_; }

 private:
  ChannelSource(double p, SplitMix64 rng, std::vector<uint8_t> bits,
                bool scripted)
      : p_(p), rng_(rng), bits_(std::move(bits)), scripted_(scripted) {}

  double p_;
  SplitMix64 rng_;
  std::vector<uint8_t> bits_;
  size_t cursor_ = 0;
  bool scripted_;
};

/// i.i.d. zero-mean Gaussian vectors with the given per-component variance.
class GaussianNoise {
 public:
  GaussianNoise(double variance, uint64_t seed, uint64_t realization);

  bool active() const { return stddev_ > 0.0; }
  /// Zero vector (and no draws) when the variance is 0.
  Vector sample(int dim);

 private:
  double stddev_;
  SplitMix64 rng_;
  std::normal_distribution<double> normal_;
};

}  // namespace lurenet

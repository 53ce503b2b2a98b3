#include "lurenet/rng.h"

#include <cmath>
#include <stdexcept>

namespace lurenet {

SplitMix64 derive_stream(uint64_t seed, uint64_t realization, StreamId id) {
  const uint64_t a = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  const uint64_t b = mix64(a + 0x9e3779b97f4a7c15ULL * (realization + 1));
  return SplitMix64(mix64(b ^ (static_cast<uint64_t>(id) << 56)));
}

ChannelSource ChannelSource::Seeded(double p, uint64_t seed,
                                    uint64_t realization, StreamId id) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("channel probability must lie in [0, 1]");
  }
  return ChannelSource(p, derive_stream(seed, realization, id), {}, false);
}

ChannelSource ChannelSource::Scripted(std::vector<uint8_t> bits) {
  return ChannelSource(0.0, SplitMix64(0), std::move(bits), true);
}

bool ChannelSource::next() {
  if (scripted_) {
    if (cursor_ >= bits_.size()) {
      throw std::out_of_range("scripted channel sequence exhausted");
    }
    return bits_[cursor_++] != 0;
  }
  return rng_.uniform() < p_;
}

GaussianNoise::GaussianNoise(double variance, uint64_t seed,
                             uint64_t realization)
    : stddev_(std::sqrt(variance)),
      rng_(derive_stream(seed, realization, StreamId::kProcessNoise)) {
  if (!(variance >= 0.0) || !std::isfinite(variance)) {
    throw std::invalid_argument("noise variance must be finite and >= 0");
  }
}

Vector GaussianNoise::sample(int dim) {
  Vector w = Vector::Zero(dim);
  if (!active()) return w;
  for (int i = 0; i < dim; ++i) w(i) = stddev_ * normal_(rng_);
  return w;
}

}  // namespace lurenet

#pragma once

#include <cstdint>
#include <random>

namespace hettest {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijective 64-bit mixer.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Stable seed for stream `index` under `master`. Depends only on the pair,
/// so serial and parallel runs draw identical streams.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Cheap generator for sign flips: SplitMix64 sequence, one bit per draw.
class SignStream {
public:
  explicit SignStream(std::uint64_t seed) : state_(seed) {}

  double next() {
    if (left_ == 0) {
      state_ += 0x9E3779B97F4A7C15ULL;
      bits_ = splitmix64(state_);
      left_ = 64;
    }
    const double s = (bits_ & 1ULL) ? 1.0 : -1.0;
    bits_ >>= 1;
    --left_;
    return s;
  }

private:
  std::uint64_t state_;
  std::uint64_t bits_ = 0;
  int left_ = 0;
};

} // namespace hettest

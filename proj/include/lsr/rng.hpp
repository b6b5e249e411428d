#pragma once

#include <cstdint>
#include <initializer_list>

namespace lsr {

// Counter-style splitmix64 stream. Streams derived from the same seed but a
// different key path are independent, which keeps augmentation, weight init
// and MC-dropout passes order-independent and reproducible across platforms
// (no implementation-defined std::distribution behavior).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed ^ kGamma)) {}

  // Derives a child stream from (seed, path...). Used as
  // Rng::keyed(seed, {pose_idx, copy_idx}) etc.
  static Rng keyed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix(seed ^ kGamma);
    for (std::uint64_t k : path) s = mix(s ^ (k + kGamma));
    Rng r(0);
    r.state_ = s;
    return r;
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n); n must be > 0
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace lsr

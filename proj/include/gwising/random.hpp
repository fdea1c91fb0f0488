#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gwising {

// Deterministic pseudo-random stream. One stream per worker; never shared.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  // Independent stream keyed by (master seed, key path). Keys are mixed with
  // splitmix64, so streams for neighbouring replica indices are unrelated.
  static RandomStream derive(std::uint64_t master_seed,
                             std::initializer_list<std::uint64_t> keys);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1].
  double uniform_open_zero() { return 1.0 - uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Number of failures before the first success of a Bernoulli(p) sequence.
  // p must lie in (0, 1].
  std::uint64_t geometric_gap(double p);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace gwising

#include "gwising/random.hpp"

#include <cmath>
#include <limits>

namespace gwising {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32)};
  engine_.seed(seq);
}

RandomStream RandomStream::derive(std::uint64_t master_seed,
                                  std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(master_seed);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return RandomStream(h);
}

std::uint64_t RandomStream::geometric_gap(double p) {
  if (p >= 1.0) return 0;
  const double u = uniform_open_zero();
  const double gap = std::floor(std::log(u) / std::log1p(-p));
  if (!(gap < 1.8e19)) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(gap);
}

}  // namespace gwising

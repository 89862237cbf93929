#pragma once

// Seedable, splittable pseudo-random stream (splitmix64).  Substreams are
// derived from (seed, stream_id), so Monte Carlo chunks can be assigned to
// fixed stream ids and results do not depend on how chunks are scheduled
// across workers.

#include <cstdint>

namespace bihom {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static SplitMix64 stream(std::uint64_t seed, std::uint64_t stream_id) {
    // Decorrelate the substream by running the mixer over (seed, id).
    SplitMix64 g(seed ^ 0x9e3779b97f4a7c15ull);
    g.next();
    g.state_ ^= stream_id * 0xbf58476d1ce4e5b9ull;
    g.next();
    return g;
  }

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform double in [0,1).
  double uniform01() { return (next() >> 11) * 0x1.0p-53; }

  // Uniform double in [-1,1).
  double uniform_sym() { return 2.0 * uniform01() - 1.0; }

  static constexpr const char* name() { return "splitmix64"; }

 private:
  std::uint64_t state_;
};

}  // namespace bihom

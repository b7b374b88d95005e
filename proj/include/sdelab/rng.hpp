#pragma once

#include <cstdint>
#include <cmath>

namespace sdelab {

// Counter-based random stream: every draw is a pure function of
// (seed, replication, counter), so replications are reproducible and can
// run in parallel without shared state.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t replication)
      : key_(mix(mix(seed + 0x9e3779b97f4a7c15ull) ^ replication)) {}

  // uniform on (0,1), never exactly 0 or 1
  double uniform() {
    const std::uint64_t z = mix(key_ ^ mix(counter_++));
    return (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
  }

  // standard normal via Box-Muller (cosine branch; two uniforms per draw)
  double gaussian() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace sdelab

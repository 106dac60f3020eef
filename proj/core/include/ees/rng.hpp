#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ees::rng {

// Counter-based generation: every variate is a pure function of
// (seed, stream, index), so independent streams can be drawn in any order
// and in parallel with identical results.

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix3(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix64(splitmix64(splitmix64(a) ^ b) ^ c);
}

/// Uniform double in (0, 1].
inline double uniform_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

/// Uniform double in [0, 1).
inline double uniform(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Box-Muller pair of independent standard normals for counter `index`.
inline void normal_pair(std::uint64_t seed, std::uint64_t stream, std::uint64_t index,
                        double& z0, double& z1) {
  const double u1 = uniform_open(mix3(seed, stream, 2 * index));
  const double u2 = uniform(mix3(seed, stream, 2 * index + 1));
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  z0 = r * std::cos(angle);
  z1 = r * std::sin(angle);
}

/// Sequential view of one counter-based stream.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double z0, z1;
    normal_pair(seed_, stream_, index_++, z0, z1);
    spare_ = z1;
    have_spare_ = true;
    return z0;
  }

  double next_uniform() { return uniform(mix3(seed_, stream_ ^ 0x5bf03635ULL, uindex_++)); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t index_ = 0;
  std::uint64_t uindex_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ees::rng

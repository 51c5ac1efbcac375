#pragma once

#include <cstdint>

namespace ctpd {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, counter), so shards of a Monte Carlo run can be
/// evaluated in any order or on any thread and still agree bit for bit.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))) {}

  std::uint64_t bits(std::uint64_t counter) const {
    return mix(key_ + mix(counter ^ 0xd1b54a32d192ed03ULL));
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  /// Uniform on the open interval (lo, hi).
  double uniform_open(std::uint64_t counter, double lo, double hi) const {
    const double u = (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  static std::uint64_t mix(std::uint64_t z) {
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t key_;
};

} // namespace ctpd

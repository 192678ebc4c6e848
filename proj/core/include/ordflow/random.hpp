#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ordflow {

// Counter-based generator: every draw is a pure function of (key, counter),
// so streams can be regenerated in any order or on any thread.
class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t key) : key_(key) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Derive an independent key from a parent key and a stream index.
  static constexpr std::uint64_t derive(std::uint64_t key, std::uint64_t stream) {
    return mix(key ^ mix(stream + 0x632be59bd9b4e019ULL));
  }

  constexpr std::uint64_t bits(std::uint64_t counter) const {
    return mix(key_ ^ mix(counter));
  }

  // Uniform in the open interval (0, 1).
  double uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on counters 2c and 2c+1.
  double normal(std::uint64_t counter) const {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace ordflow

#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace rsdazzle {

// Counter-based deterministic generator. Every consumer owns a stream named
// after its purpose, keyed by (seed, stream name, counter); there is no global
// RNG state anywhere in the library, so results are reproducible bit for bit
// across platforms and thread schedules.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::string_view stream)
      : key_(mix64(seed ^ fnv1a64(stream))) {}

  std::uint64_t next_u64() { return mix64(key_ + counter_++ * kGamma); }

  // Uniform in [0,1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  // Standard normal via Box-Muller; stateless per call (the spare is dropped
  // so the counter advance never depends on call history).
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  static constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  // splitmix64 finalizer
  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z += kGamma;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace rsdazzle

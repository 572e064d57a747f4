#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace ammasi {

/// Deterministic 64-bit generator (splitmix64). All randomness in the
/// toolkit flows through this so that runs are bit-reproducible across
/// platforms and standard-library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer in [0, n). n must be >= 1.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  /// Standard normal via Box-Muller (no cached spare, keeps streams simple).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double stdev) { return mean + stdev * normal(); }

  /// Index sampled proportionally to non-negative weights (sum must be > 0).
  std::size_t weighted_index(std::span<const double> weights, double total) {
    double x = uniform() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      x -= weights[i];
      if (x < 0.0) return i;
    }
    return weights.size() - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Named sub-stream: same seed + same name -> same stream, independent of
  /// draw order elsewhere. Extra salts separate per-node / per-walk streams.
  static Rng stream(std::uint64_t seed, std::string_view name,
                    std::uint64_t salt_a = 0, std::uint64_t salt_b = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the name
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    Rng mix(seed ^ h);
    mix.state_ += 0x9e3779b97f4a7c15ULL * salt_a;
    mix.state_ ^= 0xd1342543de82ef95ULL * (salt_b + 1);
    mix.next_u64();
    return mix;
  }

 private:
  std::uint64_t state_;
};

}  // namespace ammasi

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace memshare {

// Deterministic random stream. All distributions are implemented here rather
// than via <random> distribution classes, whose output is
// implementation-defined; this keeps runs reproducible byte-for-byte.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed), seed_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform over {lo, ..., hi} inclusive; rejection keeps it unbiased.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    const std::uint64_t span = hi - lo + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return lo + x % span;
  }

  // Standard normal via Box-Muller (second value cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Standard Gumbel: -log(-log(U)).
  double gumbel() {
    double u = uniform01();
    while (u <= 0.0) u = uniform01();
    return -std::log(-std::log(u));
  }

  // Derive an independent child stream; tag separates purposes, index
  // separates instances (episodes, agents, grid cells).
  Rng child(std::string_view tag, std::uint64_t index = 0) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ull ^ seed_;
    for (char c : tag) h = (h ^ static_cast<std::uint64_t>(c)) * 0x100000001b3ull;
    h ^= index + 0x632be59bd9b4e019ull + (h << 6) + (h >> 2);
    return Rng(splitmix(h));
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  std::uint64_t seed_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace memshare

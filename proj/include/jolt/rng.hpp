// Deterministic, portable random streams.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard, so identical seeds reproduce bit-identical streams on every
// platform. The std::*_distribution adaptors are NOT portable, so all value
// derivation (uniform doubles, unbiased integers, normals, shuffles) is
// implemented here.
//
// Every consumer of randomness derives its own seed with derive_seed(root,
// tag, index); e.g. ("shuffle", epoch) for the per-epoch minibatch
// permutation. This keeps runs reproducible and makes resume trivial: no
// generator state needs to survive a restart.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "jolt/error.hpp"

namespace jolt {

inline constexpr double kPi = 3.14159265358979323846;

// One splitmix64 step; advances state and returns the next value.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent child seed from a root seed, a stream tag and an
// optional index (epoch number, cell number, ...).
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over the tag
  for (char ch : tag) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  std::uint64_t s = root;
  s ^= h + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
  s ^= index + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
  splitmix64(s);
  splitmix64(s);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Unbiased integer in [0, n). Rejection sampling on the raw engine output.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw ContractError("Rng::uniform_int: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t x = engine_();
      if (x >= threshold) return x % n;
    }
  }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_int(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace jolt

// serkit/rng.hpp
//
// Deterministic random streams. Every stochastic step in the toolkit
// (splits, shuffles, weight init, dropout, synthesis) draws from an Rng
// seeded through deriveSeed, so runs are bit-reproducible from one base
// seed. std::random distributions are avoided on purpose: their output is
// implementation-defined, while mt19937_64 itself is pinned by the
// standard.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SERKIT_RNG_HPP
#define SERKIT_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace serkit {

// FNV-1a over bytes; stable across platforms (std::hash is not).
inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// splitmix64 finalizer; spreads low-entropy seeds over the full word.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t deriveSeed(std::uint64_t base, std::string_view tag) {
  return mix64(base ^ fnv1a64(tag));
}

inline std::uint64_t deriveSeed(std::uint64_t base, std::string_view tag,
                                std::uint64_t n) {
  return mix64(deriveSeed(base, tag) + 0x632be59bd9b4e019ull * n);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() { return (bits() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) via rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = bits();
    while (x >= limit) x = bits();
    return x % n;
  }

  // Standard normal, Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Sample visiting order for one epoch, keyed by (seed, epoch) so every
// epoch has its own order and every run reproduces it.
inline std::vector<std::size_t> epochOrder(std::size_t n, std::uint64_t seed,
                                           int epoch, bool shuffle) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle) {
    Rng rng(deriveSeed(seed, "epoch-order", static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
  }
  return order;
}

}  // namespace serkit

#endif  // SERKIT_RNG_HPP

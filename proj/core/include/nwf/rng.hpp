// Copyright 2026 The nwf authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef NWF_RNG_HPP_
#define NWF_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "nwf/common.hpp"

namespace nwf {

// Deterministic random source. All distributions are implemented here rather
// than with std:: distribution objects, whose output streams are
// implementation defined. mt19937_64 itself is fully specified by the
// standard, so every draw is reproducible across platforms and compilers.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [lo, hi], both inclusive. Rejection sampling keeps the
  // distribution exact.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    NWF_REQUIRE(lo <= hi, "uniform_int: empty range");
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<int64_t>(gen_());  // full 64-bit range
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return lo + static_cast<int64_t>(x % span);
  }

  // Standard normal via the basic Box-Muller transform. The second value of
  // each pair is discarded so the draw count per call is fixed.
  double gaussian() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double gaussian(double mean, double stddev) {
    return mean + stddev * gaussian();
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  const T& choice(const std::vector<T>& items) {
    NWF_REQUIRE(!items.empty(), "choice: empty vector");
    return items[static_cast<size_t>(
        uniform_int(0, static_cast<int64_t>(items.size()) - 1))];
  }

  // Index drawn proportionally to the given non-negative weights.
  size_t weighted_index(const std::vector<double>& weights) {
    NWF_REQUIRE(!weights.empty(), "weighted_index: empty weights");
    double total = 0.0;
    for (double w : weights) {
      NWF_REQUIRE(w >= 0.0, "weighted_index: negative weight");
      total += w;
    }
    NWF_REQUIRE(total > 0.0, "weighted_index: all weights zero");
    double x = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (x < acc) return i;
    }
    return weights.size() - 1;
  }

  // Fisher-Yates shuffle driven by uniform_int.
  template <class T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

  // Sample k distinct indices from [0, n) in selection order.
  std::vector<size_t> sample_indices(size_t n, size_t k) {
    NWF_REQUIRE(k <= n, "sample_indices: k > n");
    std::vector<size_t> pool(n);
    for (size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<size_t> out;
    out.reserve(k);
    for (size_t i = 0; i < k; ++i) {
      size_t j = static_cast<size_t>(
          uniform_int(static_cast<int64_t>(i), static_cast<int64_t>(n) - 1));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

 private:
  std::mt19937_64 gen_;
};

// Derives an independent stream seed from a master seed and a component tag,
// so subsystems (corpus, init, sampler, noise) never share a stream.
inline uint64_t derive_seed(uint64_t master, std::string_view component) {
  // FNV-1a over the tag, then splitmix64 finalization.
  uint64_t h = 1469598103934665603ull;
  for (char c : component) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  uint64_t z = master + 0x9e3779b97f4a7c15ull + h;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace nwf

#endif  // NWF_RNG_HPP_

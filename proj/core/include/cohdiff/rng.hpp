// Copyright 2026 The cohdiff Authors.
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
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef COHDIFF_RNG_HPP_
#define COHDIFF_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>

namespace cohdiff {

// std::uniform_real_distribution / std::normal_distribution are
// implementation-defined, so every draw here is spelled out explicitly.
// Identical seeds give identical streams on any conforming platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [lo, hi] inclusive (hi >= lo). Uses rejection-free
  /// scaling; bias is negligible for the small ranges used here.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(uniform() * static_cast<double>(hi - lo + 1));
  }

  /// Standard normal via Box-Muller. Consumes two uniforms per value; no
  /// cached spare, so the stream position is a pure function of call count.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  template <class S>
  void fill_normal(S* dst, int64_t n, double sigma = 1.0, double mu = 0.0) {
    for (int64_t i = 0; i < n; ++i) dst[i] = static_cast<S>(mu + sigma * normal());
  }

  template <class S>
  void fill_uniform(S* dst, int64_t n, double lo, double hi) {
    for (int64_t i = 0; i < n; ++i) dst[i] = static_cast<S>(lo + (hi - lo) * uniform());
  }

 private:
  std::mt19937_64 gen_;
};

/// SplitMix64 step; used to derive independent child seeds from a master
/// seed without correlations between shards.
inline uint64_t split_seed(uint64_t seed, uint64_t index) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace cohdiff

#endif  // COHDIFF_RNG_HPP_

// Copyright 2026 The linsup Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LINSUP_RNG_HPP_
#define LINSUP_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

#include "linsup/error.hpp"

namespace linsup {

using Rng = std::mt19937_64;

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based stream split: the seed of stream (k1, k2, ...) under `root`
// is a SplitMix64 chain over the keys, so a stream's draws depend only on
// its keys and never on scheduling.
inline std::uint64_t StreamSeed(std::uint64_t root,
                                std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = SplitMix64(root);
  for (std::uint64_t k : keys) h = SplitMix64(h ^ SplitMix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng MakeStream(std::uint64_t root,
                      std::initializer_list<std::uint64_t> keys) {
  return Rng(StreamSeed(root, keys));
}

inline double Uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline bool Bernoulli(Rng& rng, double p) { return Uniform01(rng) < p; }

inline int UniformInt(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Inverse-CDF draw from a (not necessarily normalized) weight vector.
inline int SampleIndex(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  Require(total > 0.0, "SampleIndex: weights must have positive mass");
  double u = Uniform01(rng) * total;
  int last_positive = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    if (u < weights[i]) return last_positive;
    u -= weights[i];
  }
  return last_positive;
}

}  // namespace linsup

#endif  // LINSUP_RNG_HPP_

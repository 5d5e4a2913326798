/* Copyright 2026 The MCM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef MCM_RNG_HPP_
#define MCM_RNG_HPP_

#include <array>
#include <cstdint>

namespace mcm {

// SplitMix64 finalizer (Steele, Lea, Flood 2014). Constants:
//   increment 0x9E3779B97F4A7C15, multipliers 0xBF58476D1CE4E5B9 and
//   0x94D049BB133111EB, shifts 30/27/31.
std::uint64_t SplitMix64(std::uint64_t& state);

// Stateless mix of one value, i.e. one SplitMix64 step from `x`.
std::uint64_t Mix64(std::uint64_t x);

// Stream identifiers. Every random draw in the pipeline comes from a stream
// seeded by DeriveSeed(run_seed, kind, a, b) so results do not depend on
// call order.
enum class StreamKind : std::uint64_t {
  kInit = 1,
  kMix = 2,
  kMask = 3,
  kShuffle = 4,
  kEvalMix = 5,
  kSynth = 6,
  kGradcheck = 7,
};

// seed' = Mix64(Mix64(Mix64(Mix64(base) ^ kind) ^ a) ^ b)
std::uint64_t DeriveSeed(std::uint64_t base, StreamKind kind, std::uint64_t a = 0,
                         std::uint64_t b = 0);

// xoshiro256** 1.0 (Blackman, Vigna). State is filled from four consecutive
// SplitMix64 outputs of the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t NextU64();

  // Uniform integer in [0, bound) by rejection: draws below
  // (2^64 - bound) % bound are discarded, the rest are reduced mod bound.
  std::uint64_t UniformInt(std::uint64_t bound);

  // Uniform double in [0, 1): top 53 bits times 2^-53.
  double Uniform();

  // Standard normal by Box-Muller on (1 - Uniform(), Uniform()); one value
  // per call, the sine branch is discarded.
  double Normal();

  // Normal(0, stddev) resampled until it lies within [-2 stddev, 2 stddev].
  double TruncatedNormal(double stddev);

 private:
  std::array<std::uint64_t, 4> s_;
};

}  // namespace mcm

#endif  // MCM_RNG_HPP_

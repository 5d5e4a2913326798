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
#ifndef MCM_FUSION_HPP_
#define MCM_FUSION_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mcm/tensor.hpp"

namespace mcm {

// RGB in [H x W x 3] and depth in [H x W x 1], values in [0, 1].
struct ImagePair {
  Tensor rgb;
  Tensor depth;

  std::size_t height() const { return rgb.dim(0); }
  std::size_t width() const { return rgb.dim(1); }
};

// Early fusion by channel concatenation: [H x W x 4], channels R, G, B, D.
Tensor Fuse(const ImagePair& pair);
ImagePair SplitFused(const Tensor& fused);

// [H x W x C] -> [L x (P*P*C)] with L = (H/P)(W/P).
//
// Patches are numbered row-major over the patch grid. Inside a patch the
// vector is laid out pixel-row-major with channels fastest:
//   patch[(y * P + x) * C + c] = img[(py * P + y), (px * P + x), c].
// Both functions copy data and do not record gradients.
Tensor Patchify(const Tensor& image, std::size_t patch);
Tensor Unpatchify(const Tensor& patches, std::size_t height, std::size_t width,
                  std::size_t patch, std::size_t channels);

// Per-patch channel-mixing decision. `perm[k]` is the original channel index
// (0=R, 1=G, 2=B, 3=D) written to output slot k; it is a permutation of the
// three channels that survive the drop.
struct MixEntry {
  std::uint8_t dropped = 3;
  std::array<std::uint8_t, 3> perm{0, 1, 2};
};

struct MixPlan {
  std::vector<MixEntry> entries;
  std::uint64_t seed = 0;

  std::size_t size() const { return entries.size(); }
};

// Each patch draws from Rng(seed) in order: dropped = UniformInt(4), then
// k = UniformInt(6) selecting the k-th lexicographic arrangement of the
// ascending survivors ({012, 021, 102, 120, 201, 210}).
MixPlan SampleMixPlan(std::size_t num_patches, std::uint64_t seed);

// Plan that drops depth and keeps RGB order on every patch.
MixPlan IdentityMixPlan(std::size_t num_patches);

// [L x (P*P*4)] -> [L x (P*P*3)].
Tensor ChannelMix(const Tensor& fused_patches, const MixPlan& plan);

struct MaskPlan {
  std::vector<std::size_t> visible;  // ascending
  std::vector<std::size_t> masked;   // ascending
  double ratio = 0.0;
  std::uint64_t seed = 0;

  std::size_t num_patches() const { return visible.size() + masked.size(); }
  bool IsMasked(std::size_t patch) const;
};

// round(ratio * L), halves rounded away from zero.
std::size_t MaskCount(std::size_t num_patches, double ratio);

// Masked set = first MaskCount() entries of a seeded partial Fisher-Yates
// shuffle of 0..L-1: for i < count, swap(a[i], a[i + UniformInt(L - i)]).
MaskPlan SampleMaskPlan(std::size_t num_patches, double ratio, std::uint64_t seed);

// Little-endian debug records.
//   mix:  "MIXP" u64 seed, u32 L, L x (u8 dropped, u8 perm[3])
//   mask: "MSKP" u64 seed, f64 ratio, u32 L, u32 M, M x u32 masked index
std::vector<std::uint8_t> SerializeMixPlan(const MixPlan& plan);
MixPlan DeserializeMixPlan(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> SerializeMaskPlan(const MaskPlan& plan);
MaskPlan DeserializeMaskPlan(std::span<const std::uint8_t> bytes);

}  // namespace mcm

#endif  // MCM_FUSION_HPP_

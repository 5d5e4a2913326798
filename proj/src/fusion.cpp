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
#include "mcm/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mcm/binio.hpp"
#include "mcm/error.hpp"
#include "mcm/rng.hpp"

namespace mcm {

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 6> kArrangements{{
    {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

void RequireImage(const Tensor& t, std::size_t channels, const char* what) {
  if (t.rank() != 3 || t.dim(2) != channels) {
    Fail(ErrorKind::kDimension, std::string(what) + ": expected [H x W x " +
                                    std::to_string(channels) + "], got " +
                                    ShapeToString(t.shape()));
  }
}

}  // namespace

Tensor Fuse(const ImagePair& pair) {
  RequireImage(pair.rgb, 3, "fuse rgb");
  RequireImage(pair.depth, 1, "fuse depth");
  const std::size_t h = pair.rgb.dim(0), w = pair.rgb.dim(1);
  if (pair.depth.dim(0) != h || pair.depth.dim(1) != w) {
    Fail(ErrorKind::kDimension, "fuse: rgb " + ShapeToString(pair.rgb.shape()) +
                                    " and depth " + ShapeToString(pair.depth.shape()) +
                                    " differ in size");
  }
  std::vector<double> out(h * w * 4);
  const auto rgb = pair.rgb.data();
  const auto depth = pair.depth.data();
  for (std::size_t i = 0; i < h * w; ++i) {
    out[i * 4 + 0] = rgb[i * 3 + 0];
    out[i * 4 + 1] = rgb[i * 3 + 1];
    out[i * 4 + 2] = rgb[i * 3 + 2];
    out[i * 4 + 3] = depth[i];
  }
  return Tensor::FromData({h, w, 4}, std::move(out));
}

ImagePair SplitFused(const Tensor& fused) {
  RequireImage(fused, 4, "split");
  const std::size_t h = fused.dim(0), w = fused.dim(1);
  std::vector<double> rgb(h * w * 3), depth(h * w);
  const auto in = fused.data();
  for (std::size_t i = 0; i < h * w; ++i) {
    for (std::size_t c = 0; c < 3; ++c) rgb[i * 3 + c] = in[i * 4 + c];
    depth[i] = in[i * 4 + 3];
  }
  return ImagePair{Tensor::FromData({h, w, 3}, std::move(rgb)),
                   Tensor::FromData({h, w, 1}, std::move(depth))};
}

Tensor Patchify(const Tensor& image, std::size_t patch) {
  if (image.rank() != 3) {
    Fail(ErrorKind::kDimension, "patchify: expected [H x W x C], got " +
                                    ShapeToString(image.shape()));
  }
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (patch == 0 || h % patch != 0 || w % patch != 0) {
    Fail(ErrorKind::kDimension, "patchify: patch size " + std::to_string(patch) +
                                    " does not divide image " + ShapeToString(image.shape()));
  }
  const std::size_t gw = w / patch, gh = h / patch;
  const std::size_t width = patch * patch * c;
  std::vector<double> out(gh * gw * width);
  const auto in = image.data();
  for (std::size_t py = 0; py < gh; ++py)
    for (std::size_t px = 0; px < gw; ++px) {
      double* dst = out.data() + (py * gw + px) * width;
      for (std::size_t y = 0; y < patch; ++y)
        for (std::size_t x = 0; x < patch; ++x) {
          const std::size_t src = ((py * patch + y) * w + (px * patch + x)) * c;
          std::copy_n(in.begin() + src, c, dst + (y * patch + x) * c);
        }
    }
  return Tensor::FromData({gh * gw, width}, std::move(out));
}

Tensor Unpatchify(const Tensor& patches, std::size_t height, std::size_t width,
                  std::size_t patch, std::size_t channels) {
  if (patch == 0 || height % patch != 0 || width % patch != 0) {
    Fail(ErrorKind::kDimension, "unpatchify: patch size does not divide the image");
  }
  const std::size_t gh = height / patch, gw = width / patch;
  const std::size_t pw = patch * patch * channels;
  if (patches.rank() != 2 || patches.dim(0) != gh * gw || patches.dim(1) != pw) {
    Fail(ErrorKind::kDimension, "unpatchify: expected [" + std::to_string(gh * gw) + "x" +
                                    std::to_string(pw) + "], got " +
                                    ShapeToString(patches.shape()));
  }
  std::vector<double> out(height * width * channels);
  const auto in = patches.data();
  for (std::size_t py = 0; py < gh; ++py)
    for (std::size_t px = 0; px < gw; ++px) {
      const double* src = in.data() + (py * gw + px) * pw;
      for (std::size_t y = 0; y < patch; ++y)
        for (std::size_t x = 0; x < patch; ++x) {
          const std::size_t dst = ((py * patch + y) * width + (px * patch + x)) * channels;
          std::copy_n(src + (y * patch + x) * channels, channels, out.begin() + dst);
        }
    }
  return Tensor::FromData({height, width, channels}, std::move(out));
}

MixPlan SampleMixPlan(std::size_t num_patches, std::uint64_t seed) {
  Require(num_patches >= 1, ErrorKind::kContract, "sample_mix_plan: need at least one patch");
  MixPlan plan;
  plan.seed = seed;
  plan.entries.resize(num_patches);
  Rng rng(seed);
  for (auto& e : plan.entries) {
    e.dropped = static_cast<std::uint8_t>(rng.UniformInt(4));
    std::array<std::uint8_t, 3> survivors{};
    std::size_t n = 0;
    for (std::uint8_t c = 0; c < 4; ++c)
      if (c != e.dropped) survivors[n++] = c;
    const auto& arr = kArrangements[rng.UniformInt(6)];
    for (std::size_t k = 0; k < 3; ++k) e.perm[k] = survivors[arr[k]];
  }
  return plan;
}

MixPlan IdentityMixPlan(std::size_t num_patches) {
  MixPlan plan;
  plan.entries.assign(num_patches, MixEntry{});
  return plan;
}

Tensor ChannelMix(const Tensor& fused_patches, const MixPlan& plan) {
  if (fused_patches.rank() != 2 || fused_patches.dim(1) % 4 != 0) {
    Fail(ErrorKind::kDimension, "channel_mix: expected [L x (P*P*4)], got " +
                                    ShapeToString(fused_patches.shape()));
  }
  const std::size_t l = fused_patches.dim(0);
  Require(plan.size() == l, ErrorKind::kContract,
          "channel_mix: plan has " + std::to_string(plan.size()) + " entries for " +
              std::to_string(l) + " patches");
  const std::size_t pixels = fused_patches.dim(1) / 4;
  std::vector<double> out(l * pixels * 3);
  const auto in = fused_patches.data();
  for (std::size_t i = 0; i < l; ++i) {
    const MixEntry& e = plan.entries[i];
    Require(e.dropped < 4 && e.perm[0] != e.dropped && e.perm[1] != e.dropped &&
                e.perm[2] != e.dropped && e.perm[0] != e.perm[1] && e.perm[0] != e.perm[2] &&
                e.perm[1] != e.perm[2] && e.perm[0] < 4 && e.perm[1] < 4 && e.perm[2] < 4,
            ErrorKind::kContract, "channel_mix: invalid plan entry at patch " + std::to_string(i));
    const double* src = in.data() + i * pixels * 4;
    double* dst = out.data() + i * pixels * 3;
    for (std::size_t p = 0; p < pixels; ++p)
      for (std::size_t k = 0; k < 3; ++k) dst[p * 3 + k] = src[p * 4 + e.perm[k]];
  }
  return Tensor::FromData({l, pixels * 3}, std::move(out));
}

bool MaskPlan::IsMasked(std::size_t patch) const {
  return std::binary_search(masked.begin(), masked.end(), patch);
}

std::size_t MaskCount(std::size_t num_patches, double ratio) {
  return static_cast<std::size_t>(std::round(ratio * static_cast<double>(num_patches)));
}

MaskPlan SampleMaskPlan(std::size_t num_patches, double ratio, std::uint64_t seed) {
  Require(ratio >= 0.0 && ratio < 1.0, ErrorKind::kContract,
          "sample_mask_plan: ratio must lie in [0, 1), got " + std::to_string(ratio));
  Require(num_patches >= 1, ErrorKind::kContract, "sample_mask_plan: need at least one patch");
  const std::size_t count = MaskCount(num_patches, ratio);
  std::vector<std::size_t> order(num_patches);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.UniformInt(num_patches - i);
    std::swap(order[i], order[j]);
  }
  MaskPlan plan;
  plan.ratio = ratio;
  plan.seed = seed;
  plan.masked.assign(order.begin(), order.begin() + count);
  plan.visible.assign(order.begin() + count, order.end());
  std::sort(plan.masked.begin(), plan.masked.end());
  std::sort(plan.visible.begin(), plan.visible.end());
  return plan;
}

std::vector<std::uint8_t> SerializeMixPlan(const MixPlan& plan) {
  ByteWriter w;
  w.Bytes("MIXP");
  w.U64(plan.seed);
  w.U32(static_cast<std::uint32_t>(plan.size()));
  for (const auto& e : plan.entries) {
    w.U8(e.dropped);
    for (auto c : e.perm) w.U8(c);
  }
  return w.Take();
}

MixPlan DeserializeMixPlan(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Require(r.Bytes(4, "mix plan magic") == "MIXP", ErrorKind::kFormat, "mix plan: bad magic");
  MixPlan plan;
  plan.seed = r.U64("mix plan seed");
  plan.entries.resize(r.U32("mix plan length"));
  for (auto& e : plan.entries) {
    e.dropped = r.U8("mix plan entry");
    for (auto& c : e.perm) c = r.U8("mix plan entry");
  }
  return plan;
}

std::vector<std::uint8_t> SerializeMaskPlan(const MaskPlan& plan) {
  ByteWriter w;
  w.Bytes("MSKP");
  w.U64(plan.seed);
  w.F64(plan.ratio);
  w.U32(static_cast<std::uint32_t>(plan.num_patches()));
  w.U32(static_cast<std::uint32_t>(plan.masked.size()));
  for (auto i : plan.masked) w.U32(static_cast<std::uint32_t>(i));
  return w.Take();
}

MaskPlan DeserializeMaskPlan(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Require(r.Bytes(4, "mask plan magic") == "MSKP", ErrorKind::kFormat, "mask plan: bad magic");
  MaskPlan plan;
  plan.seed = r.U64("mask plan seed");
  plan.ratio = r.F64("mask plan ratio");
  const std::size_t l = r.U32("mask plan length");
  const std::size_t m = r.U32("mask plan count");
  Require(m <= l, ErrorKind::kFormat, "mask plan: more masked patches than patches");
  std::vector<bool> is_masked(l, false);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t idx = r.U32("mask plan index");
    Require(idx < l && !is_masked[idx], ErrorKind::kFormat, "mask plan: bad masked index");
    is_masked[idx] = true;
  }
  for (std::size_t i = 0; i < l; ++i) (is_masked[i] ? plan.masked : plan.visible).push_back(i);
  return plan;
}

}  // namespace mcm

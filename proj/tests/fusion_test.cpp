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
#include <algorithm>
#include <map>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "mcm/error.hpp"
#include "mcm/fusion.hpp"
#include "mcm/rng.hpp"

namespace mcm {
namespace {

Tensor RandomImage(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(h * w * c);
  for (auto& x : v) x = rng.Uniform();
  return Tensor::FromData({h, w, c}, std::move(v));
}

double UniformPValue(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  const double e = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (double c : counts) stat += (c - e) * (c - e) / e;
  return boost::math::cdf(boost::math::complement(
      boost::math::chi_squared(static_cast<double>(counts.size() - 1)), stat));
}

TEST(FusionTest, FuseAndSplitRoundTrip) {
  const ImagePair pair{RandomImage(4, 6, 3, 1), RandomImage(4, 6, 1, 2)};
  const Tensor fused = Fuse(pair);
  ASSERT_EQ(fused.shape(), (Shape{4, 6, 4}));
  EXPECT_EQ(fused[4 * 7 + 3], pair.depth[7]);
  EXPECT_EQ(fused[4 * 7 + 1], pair.rgb[3 * 7 + 1]);
  const ImagePair back = SplitFused(fused);
  for (std::size_t i = 0; i < pair.rgb.numel(); ++i) EXPECT_EQ(back.rgb[i], pair.rgb[i]);
  for (std::size_t i = 0; i < pair.depth.numel(); ++i) EXPECT_EQ(back.depth[i], pair.depth[i]);
}

TEST(FusionTest, FuseRejectsMismatchedSizes) {
  EXPECT_THROW(Fuse({RandomImage(4, 6, 3, 1), RandomImage(4, 4, 1, 2)}), Error);
  EXPECT_THROW(Fuse({RandomImage(4, 6, 1, 1), RandomImage(4, 6, 1, 2)}), Error);
}

TEST(FusionTest, PatchifyLayout) {
  const Tensor img = RandomImage(8, 12, 2, 3);
  const Tensor p = Patchify(img, 4);
  ASSERT_EQ(p.shape(), (Shape{6, 32}));
  // Patch 4 is grid cell (1, 1); element (y=2, x=3, c=1).
  EXPECT_EQ(p[4 * 32 + (2 * 4 + 3) * 2 + 1], img[((4 + 2) * 12 + (4 + 3)) * 2 + 1]);
  const Tensor back = Unpatchify(p, 8, 12, 4, 2);
  for (std::size_t i = 0; i < img.numel(); ++i) EXPECT_EQ(back[i], img[i]);
  EXPECT_THROW(Patchify(img, 5), Error);
}

TEST(FusionTest, ArrangementsFollowLexicographicOrder) {
  // Only the arrangement index is random; with dropped fixed per patch the
  // six orders must all appear, each being a permutation of the survivors.
  const MixPlan plan = SampleMixPlan(5000, 17);
  std::map<std::array<std::uint8_t, 3>, int> seen;
  for (const auto& e : plan.entries) {
    ASSERT_LT(e.dropped, 4);
    std::array<std::uint8_t, 3> sorted = e.perm;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::uint8_t> survivors;
    for (std::uint8_t c = 0; c < 4; ++c)
      if (c != e.dropped) survivors.push_back(c);
    EXPECT_TRUE(std::equal(sorted.begin(), sorted.end(), survivors.begin()));
    if (e.dropped == 3) ++seen[e.perm];
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(FusionTest, FirstDrawsMatchRngContract) {
  const MixPlan plan = SampleMixPlan(3, 99);
  Rng rng(99);
  static const std::uint8_t kOrders[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                             {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& e : plan.entries) {
    const auto dropped = static_cast<std::uint8_t>(rng.UniformInt(4));
    const auto k = rng.UniformInt(6);
    std::uint8_t survivors[3], n = 0;
    for (std::uint8_t c = 0; c < 4; ++c)
      if (c != dropped) survivors[n++] = c;
    EXPECT_EQ(e.dropped, dropped);
    for (int s = 0; s < 3; ++s) EXPECT_EQ(e.perm[s], survivors[kOrders[k][s]]);
  }
}

TEST(FusionTest, DropAndPermutationAreUniform) {
  std::vector<double> drops(4, 0.0), perms(6, 0.0);
  std::size_t total = 0;
  for (std::uint64_t s = 0; total < 100000; ++s) {
    for (const auto& e : SampleMixPlan(1000, DeriveSeed(5, StreamKind::kMix, s)).entries) {
      ++drops[e.dropped];
      // Rank of the arrangement among the six orders of the survivors.
      std::array<std::uint8_t, 3> r{};
      std::array<std::uint8_t, 3> sorted = e.perm;
      std::sort(sorted.begin(), sorted.end());
      for (int k = 0; k < 3; ++k)
        r[k] = static_cast<std::uint8_t>(std::find(sorted.begin(), sorted.end(), e.perm[k]) -
                                         sorted.begin());
      const int rank = r[0] * 2 + (r[1] > r[2] ? 1 : 0);
      ++perms[rank];
      ++total;
    }
  }
  EXPECT_GT(UniformPValue(drops), 0.01);
  EXPECT_GT(UniformPValue(perms), 0.01);
}

TEST(FusionTest, ChannelMixMovesChannelsPerPlan) {
  const Tensor fused = Patchify(RandomImage(4, 4, 4, 7), 2);
  MixPlan plan = IdentityMixPlan(4);
  plan.entries[1] = MixEntry{0, {3, 2, 1}};
  const Tensor mixed = ChannelMix(fused, plan);
  ASSERT_EQ(mixed.shape(), (Shape{4, 12}));
  for (std::size_t px = 0; px < 4; ++px) {
    for (int k = 0; k < 3; ++k) {
      EXPECT_EQ(mixed[0 * 12 + px * 3 + k], fused[0 * 16 + px * 4 + k]);
      EXPECT_EQ(mixed[1 * 12 + px * 3 + k], fused[1 * 16 + px * 4 + (3 - k)]);
    }
  }
}

TEST(FusionTest, ChannelMixPreservesSurvivingMultisets) {
  const Tensor fused = Patchify(RandomImage(16, 16, 4, 8), 4);
  const MixPlan plan = SampleMixPlan(16, 21);
  const Tensor mixed = ChannelMix(fused, plan);
  for (std::size_t l = 0; l < 16; ++l) {
    std::vector<double> in, out;
    for (std::size_t px = 0; px < 16; ++px) {
      for (std::size_t c = 0; c < 4; ++c)
        if (c != plan.entries[l].dropped) in.push_back(fused[l * 64 + px * 4 + c]);
      for (std::size_t k = 0; k < 3; ++k) out.push_back(mixed[l * 48 + px * 3 + k]);
    }
    std::sort(in.begin(), in.end());
    std::sort(out.begin(), out.end());
    EXPECT_EQ(in, out);
  }
}

TEST(FusionTest, ChannelMixRejectsBadPlans) {
  const Tensor fused = Patchify(RandomImage(4, 4, 4, 7), 2);
  EXPECT_THROW(ChannelMix(fused, IdentityMixPlan(3)), Error);
  MixPlan plan = IdentityMixPlan(4);
  plan.entries[0].perm = {0, 1, 3};
  EXPECT_THROW(ChannelMix(fused, plan), Error);
}

TEST(FusionTest, MaskCountRoundsHalfAwayFromZero) {
  EXPECT_EQ(MaskCount(16, 0.0), 0u);
  EXPECT_EQ(MaskCount(16, 0.25), 4u);
  EXPECT_EQ(MaskCount(196, 0.75), 147u);
  EXPECT_EQ(MaskCount(196, 0.9), 176u);
  EXPECT_EQ(MaskCount(2, 0.25), 1u);
  EXPECT_EQ(MaskCount(6, 0.25), 2u);
}

TEST(FusionTest, MaskPlanPartitionsPatches) {
  for (std::size_t l : {16u, 196u}) {
    for (double ratio : {0.0, 0.25, 0.5, 0.75, 0.9}) {
      const MaskPlan plan = SampleMaskPlan(l, ratio, 3);
      EXPECT_EQ(plan.masked.size(), MaskCount(l, ratio));
      EXPECT_EQ(plan.num_patches(), l);
      EXPECT_TRUE(std::is_sorted(plan.visible.begin(), plan.visible.end()));
      EXPECT_TRUE(std::is_sorted(plan.masked.begin(), plan.masked.end()));
      std::vector<std::size_t> all = plan.visible;
      all.insert(all.end(), plan.masked.begin(), plan.masked.end());
      std::sort(all.begin(), all.end());
      for (std::size_t i = 0; i < l; ++i) EXPECT_EQ(all[i], i);
      for (auto m : plan.masked) EXPECT_TRUE(plan.IsMasked(m));
      for (auto v : plan.visible) EXPECT_FALSE(plan.IsMasked(v));
    }
  }
}

TEST(FusionTest, LargerRatiosMaskSupersetsWithTheSameSeed) {
  const MaskPlan a = SampleMaskPlan(64, 0.5, 11);
  const MaskPlan b = SampleMaskPlan(64, 0.75, 11);
  EXPECT_TRUE(std::includes(b.masked.begin(), b.masked.end(), a.masked.begin(), a.masked.end()));
}

TEST(FusionTest, MaskRatioOutOfRangeIsRejected) {
  EXPECT_THROW(SampleMaskPlan(16, 1.0, 0), Error);
  EXPECT_THROW(SampleMaskPlan(16, -0.1, 0), Error);
}

TEST(FusionTest, PlanSerializationRoundTrip) {
  const MixPlan mix = SampleMixPlan(10, 4);
  const MixPlan mix2 = DeserializeMixPlan(SerializeMixPlan(mix));
  EXPECT_EQ(mix2.seed, mix.seed);
  ASSERT_EQ(mix2.size(), mix.size());
  for (std::size_t i = 0; i < mix.size(); ++i) {
    EXPECT_EQ(mix2.entries[i].dropped, mix.entries[i].dropped);
    EXPECT_EQ(mix2.entries[i].perm, mix.entries[i].perm);
  }
  const MaskPlan mask = SampleMaskPlan(10, 0.5, 4);
  const auto bytes = SerializeMaskPlan(mask);
  const MaskPlan mask2 = DeserializeMaskPlan(bytes);
  EXPECT_EQ(mask2.visible, mask.visible);
  EXPECT_EQ(mask2.masked, mask.masked);
  EXPECT_EQ(mask2.ratio, mask.ratio);
  EXPECT_EQ(SerializeMaskPlan(mask2), bytes);

  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(DeserializeMaskPlan(truncated), Error);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(DeserializeMaskPlan(bad_magic), Error);
}

}  // namespace
}  // namespace mcm

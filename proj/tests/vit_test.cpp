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
#include <cmath>

#include <gtest/gtest.h>

#include "mcm/error.hpp"
#include "mcm/rng.hpp"
#include "mcm/vit.hpp"
#include "reference_block.hpp"

namespace mcm {
namespace {

ModelConfig SmallConfig() {
  ModelConfig c;
  c.image_h = 16;
  c.image_w = 16;
  c.patch = 4;
  c.dim = 16;
  c.dec_dim = 8;
  c.heads = 2;
  c.dec_heads = 2;
  c.enc_depth = 2;
  c.dec_rgb_depth = 2;
  c.dec_depth_depth = 1;
  c.num_aus = 3;
  return c;
}

Tensor RandomPatches(std::size_t l, std::size_t width, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(l * width);
  for (auto& x : v) x = rng.Uniform();
  return Tensor::FromData({l, width}, std::move(v));
}

TEST(VitTest, PositionTableValues) {
  const PosEmbed pos = BuildPosEmbed(3, 4, 8);
  ASSERT_EQ(pos.table.shape(), (Shape{12, 8}));
  // Cell (2, 3): [sin(2), sin(2/100), cos(2), cos(2/100), sin(3), ...].
  const double* row = pos.table.data().data() + (2 * 4 + 3) * 8;
  EXPECT_DOUBLE_EQ(row[0], std::sin(2.0));
  EXPECT_DOUBLE_EQ(row[1], std::sin(2.0 / 100.0));
  EXPECT_DOUBLE_EQ(row[2], std::cos(2.0));
  EXPECT_DOUBLE_EQ(row[3], std::cos(2.0 / 100.0));
  EXPECT_DOUBLE_EQ(row[4], std::sin(3.0));
  EXPECT_DOUBLE_EQ(row[7], std::cos(3.0 / 100.0));
  EXPECT_THROW(BuildPosEmbed(2, 2, 6), Error);
}

TEST(VitTest, BlockMatchesPlainLoopReference) {
  const BlockParams block = testing::PinnedBlock(3, 8, 2);
  const Tensor x = RandomPatches(5, 8, 4);
  const Tensor out = TransformerBlock(x, block, 1e-6);
  const testing::Matrix ref = testing::ReferenceBlock(testing::ToMatrix(x), block, 1e-6L);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 8; ++k)
      EXPECT_NEAR(out[i * 8 + k], static_cast<double>(ref[i][k]), 1e-12);
}

TEST(VitTest, AttentionRowsAreDistributions) {
  const BlockParams block = testing::PinnedBlock(5, 8, 4);
  AttentionTrace trace;
  MultiHeadAttention(RandomPatches(6, 8, 1), block, &trace);
  ASSERT_EQ(trace.weights.size(), 4u);
  for (const auto& w : trace.weights) {
    ASSERT_EQ(w.shape(), (Shape{6, 6}));
    for (std::size_t i = 0; i < 6; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 6; ++j) row += w[i * 6 + j];
      EXPECT_NEAR(row, 1.0, 1e-14);
    }
  }
}

TEST(VitTest, ConfigValidation) {
  ModelConfig c = SmallConfig();
  EXPECT_NO_THROW(c.Validate());
  c.patch = 5;
  EXPECT_THROW(c.Validate(), Error);
  c = SmallConfig();
  c.heads = 3;
  EXPECT_THROW(c.Validate(), Error);
  c = SmallConfig();
  c.dec_depth_depth = 2;
  EXPECT_THROW(c.Validate(), Error);
}

TEST(VitTest, InitIsSeededAndShaped) {
  const ModelParams a = InitModelParams(SmallConfig(), 1);
  const ModelParams b = InitModelParams(SmallConfig(), 1);
  const ModelParams c = InitModelParams(SmallConfig(), 2);
  const auto na = a.Named(), nb = b.Named(), nc = c.Named();
  ASSERT_EQ(na.size(), nb.size());
  bool differs = false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    EXPECT_EQ(na[i].first, nb[i].first);
    for (std::size_t j = 0; j < na[i].second.numel(); ++j) {
      EXPECT_EQ(na[i].second[j], nb[i].second[j]);
      differs = differs || na[i].second[j] != nc[i].second[j];
      if (na[i].first.find("weight") != std::string::npos) {
        EXPECT_LE(std::abs(na[i].second[j]), 0.04);
      }
    }
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(a.encoder.size(), 2u);
  EXPECT_EQ(a.patch_embed.weight.shape(), (Shape{48, 16}));
  EXPECT_EQ(a.head_rgb.weight.shape(), (Shape{8, 48}));
  EXPECT_EQ(a.head_depth.weight.shape(), (Shape{8, 16}));
  EXPECT_EQ(a.au_head.weight.shape(), (Shape{16, 3}));
}

TEST(VitTest, EncoderIgnoresMaskedPatchContents) {
  const Model model(SmallConfig(), 3);
  const MaskPlan mask = SampleMaskPlan(16, 0.75, 9);
  Tensor patches = RandomPatches(16, 48, 10);
  const Tensor before = model.Encode(patches, mask).Detach();
  auto data = patches.mutable_data();
  for (auto m : mask.masked)
    for (std::size_t k = 0; k < 48; ++k) data[m * 48 + k] = 1e6 * (k % 3 ? -1.0 : 1.0);
  const Tensor after = model.Encode(patches, mask);
  ASSERT_EQ(after.shape(), (Shape{4, 16}));
  for (std::size_t i = 0; i < after.numel(); ++i) EXPECT_EQ(before[i], after[i]);
}

TEST(VitTest, DecoderShapesAndMaskTokenPlacement) {
  const Model model(SmallConfig(), 3);
  const MaskPlan mask = SampleMaskPlan(16, 0.5, 2);
  const Tensor enc = model.Encode(RandomPatches(16, 48, 1), mask);
  const Tensor tokens = AssembleDecoderTokens(enc, mask, Reconstruction::kDepth, model.params());
  ASSERT_EQ(tokens.shape(), (Shape{16, 16}));
  for (std::size_t i = 0; i < mask.visible.size(); ++i)
    EXPECT_EQ(tokens[mask.visible[i] * 16 + 5], enc[i * 16 + 5]);
  for (auto m : mask.masked) EXPECT_EQ(tokens[m * 16 + 5], model.params().mask_token_depth[5]);
  EXPECT_EQ(model.Decode(enc, mask, Reconstruction::kRgb).shape(), (Shape{16, 48}));
  EXPECT_EQ(model.Decode(enc, mask, Reconstruction::kDepth).shape(), (Shape{16, 16}));
  EXPECT_THROW(ParseReconstruction("ir"), Error);
}

TEST(VitTest, EncodeWithNothingVisibleFails) {
  const Model model(SmallConfig(), 3);
  MaskPlan mask;
  for (std::size_t i = 0; i < 16; ++i) mask.masked.push_back(i);
  EXPECT_THROW(model.Encode(RandomPatches(16, 48, 1), mask), Error);
}

TEST(VitTest, AuLogitsForEveryModality) {
  const Model model(SmallConfig(), 3);
  Rng rng(1);
  auto image = [&](std::size_t c) {
    std::vector<double> v(16 * 16 * c);
    for (auto& x : v) x = rng.Uniform();
    return Tensor::FromData({16, 16, c}, std::move(v));
  };
  const MixPlan plan = SampleMixPlan(16, 4);
  EXPECT_EQ(model.AuLogits(image(3), Modality::kRgb).shape(), (Shape{1, 3}));
  EXPECT_EQ(model.AuLogits(image(1), Modality::kDepth).shape(), (Shape{1, 3}));
  EXPECT_EQ(model.AuLogits(image(4), Modality::kFusion, &plan).shape(), (Shape{1, 3}));
  EXPECT_THROW(model.AuLogits(image(3), Modality::kDepth), Error);
  EXPECT_THROW(model.AuLogits(image(4), Modality::kFusion), Error);
  EXPECT_THROW(ParseModality("thermal"), Error);
}

TEST(VitTest, DepthInputIsReplicatedToThreeChannels) {
  const Model model(SmallConfig(), 3);
  Rng rng(2);
  std::vector<double> d(256), rgb(768);
  for (std::size_t i = 0; i < 256; ++i) d[i] = rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = rng.Uniform();
  const Tensor a = model.AuLogits(Tensor::FromData({16, 16, 1}, d), Modality::kDepth);
  const Tensor b = model.AuLogits(Tensor::FromData({16, 16, 3}, rgb), Modality::kRgb);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(a[k], b[k]);
}

}  // namespace
}  // namespace mcm

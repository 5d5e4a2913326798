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
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mcm/error.hpp"
#include "mcm/fusion.hpp"
#include "mcm/log.hpp"
#include "mcm/objectives.hpp"
#include "mcm/rng.hpp"

namespace mcm {
namespace {

// Scalar loop in long double with its own sigmoid and clamp.
long double BruteBce(const std::vector<double>& z, const std::vector<std::uint8_t>& y,
                     const std::vector<double>& p, std::size_t n, std::size_t k) {
  long double total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      long double s = 1.0L / (1.0L + std::exp(-static_cast<long double>(z[i * k + j])));
      s = std::min<long double>(std::max<long double>(s, 1e-7L), 1.0L - 1e-7L);
      total -= y[i * k + j] ? p[j] * std::log(s) : std::log(1.0L - s);
    }
  return total / n;
}

TEST(ObjectivesTest, WeightedBceMatchesBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.UniformInt(6), k = 1 + rng.UniformInt(5);
    std::vector<double> z(n * k), p(k);
    std::vector<std::uint8_t> y(n * k);
    for (auto& v : z) v = 6.0 * rng.Normal();
    for (auto& v : y) v = static_cast<std::uint8_t>(rng.UniformInt(2));
    for (auto& v : p) v = 1.0 + 4.0 * rng.Uniform();
    const Tensor loss = WeightedBce(Tensor::FromData({n, k}, z), AuLabelMatrix(n, k, y),
                                    AuWeights{p, false});
    EXPECT_NEAR(loss.item(), static_cast<double>(BruteBce(z, y, p, n, k)), 1e-12);
  }
}

TEST(ObjectivesTest, WeightedBceAnalyticPoint) {
  const Tensor loss = WeightedBce(Tensor::FromData({1, 1}, {0.0}), AuLabelMatrix(1, 1, {1}),
                                  AuWeights{{1.0}, false});
  EXPECT_NEAR(loss.item(), -std::log(0.5), 1e-9);
}

TEST(ObjectivesTest, WeightedBceGradient) {
  const Tensor z = Tensor::FromData({2, 2}, {0.3, -1.2, 2.0, 40.0}, true);
  const AuWeights w{{2.0, 0.5}, false};
  Backward(WeightedBce(z, AuLabelMatrix(2, 2, {1, 0, 0, 1}), w));
  auto s = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  EXPECT_NEAR(z.grad()[0], -2.0 * (1.0 - s(0.3)) / 2.0, 1e-14);
  EXPECT_NEAR(z.grad()[1], s(-1.2) / 2.0, 1e-14);
  EXPECT_NEAR(z.grad()[2], s(2.0) / 2.0, 1e-14);
  // Clamped region: flat.
  EXPECT_EQ(z.grad()[3], 0.0);
}

TEST(ObjectivesTest, WeightedBceRejectsNanAndShapeMismatch) {
  const AuWeights w{{1.0, 1.0}, false};
  try {
    WeightedBce(Tensor::FromData({1, 2}, {std::nan(""), 0.0}), AuLabelMatrix(1, 2, {0, 1}), w);
    FAIL() << "expected a numeric error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
  }
  EXPECT_THROW(WeightedBce(Tensor::Zeros({2, 2}), AuLabelMatrix(1, 2, {0, 1}), w), Error);
}

AuLabelMatrix Counts(std::size_t n, const std::vector<std::size_t>& positives) {
  const std::size_t k = positives.size();
  std::vector<std::uint8_t> v(n * k, 0);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < positives[j]; ++i) v[i * k + j] = 1;
  return AuLabelMatrix(n, k, v);
}

TEST(ObjectivesTest, AuWeightsHandCase) {
  const AuWeights w = ComputeAuWeights(Counts(30, {30, 10}));
  ASSERT_EQ(w.p.size(), 2u);
  EXPECT_NEAR(w.p[0], 3.0, 1e-12);
  EXPECT_NEAR(w.p[1], 1.0, 1e-12);
  EXPECT_FALSE(w.floored);
  const AuWeights inv = ComputeAuWeights(Counts(30, {30, 10}), true);
  EXPECT_NEAR(inv.p[0], 1.0, 1e-12);
  EXPECT_NEAR(inv.p[1], 3.0, 1e-12);
}

TEST(ObjectivesTest, AuWeightsFloorsAbsentUnits) {
  std::vector<std::string> warnings;
  SetLogSink([&](LogLevel level, const std::string& m) {
    if (level == LogLevel::kWarning) warnings.push_back(m);
  });
  const AuWeights w = ComputeAuWeights(Counts(10, {6, 0}));
  SetLogSink(nullptr);
  EXPECT_TRUE(w.floored);
  EXPECT_FALSE(warnings.empty());
  // P = (6/6, 1/(6+2)); min is the floor.
  EXPECT_NEAR(w.p[0], 1.0 / (1.0 / 8.0), 1e-12);
  EXPECT_NEAR(w.p[1], 1.0, 1e-12);
  EXPECT_THROW(ComputeAuWeights(Counts(4, {0, 0})), Error);
}

TEST(ObjectivesTest, ReconstructionLossOnMaskedPatchesOnly) {
  MaskPlan mask;
  mask.visible = {0};
  mask.masked = {1};
  const Tensor pr = Tensor::FromData({2, 3}, {9, 9, 9, 1, 2, 3});
  const Tensor tr = Tensor::FromData({2, 3}, {0, 0, 0, 0, 0, 0});
  const Tensor pd = Tensor::FromData({2, 1}, {5, 2});
  const Tensor td = Tensor::FromData({2, 1}, {0, 1});
  const ReconLoss loss = ReconstructionLoss(pr, pd, tr, td, mask);
  EXPECT_DOUBLE_EQ(loss.rgb.item(), (1.0 + 4.0 + 9.0) / 3.0);
  EXPECT_DOUBLE_EQ(loss.depth.item(), 1.0);
  EXPECT_DOUBLE_EQ(loss.total.item(), 14.0 / 3.0 + 1.0);
}

TEST(ObjectivesTest, ReconstructionLossWithoutMaskedPatchesIsZero) {
  std::vector<std::string> warnings;
  SetLogSink([&](LogLevel, const std::string& m) { warnings.push_back(m); });
  MaskPlan mask;
  mask.visible = {0, 1};
  const ReconLoss loss = ReconstructionLoss(Tensor::Zeros({2, 3}), Tensor::Zeros({2, 1}),
                                            Tensor::Full({2, 3}, 1.0), Tensor::Full({2, 1}, 1.0),
                                            mask);
  SetLogSink(nullptr);
  EXPECT_EQ(loss.total.item(), 0.0);
  EXPECT_FALSE(warnings.empty());
}

TEST(ObjectivesTest, F1HandCases) {
  // AU1: TP=2 FP=1 FN=0 -> 4/5. AU2: no positives and none predicted -> 0.
  const AuLabelMatrix labels(4, 2, {1, 0, 1, 0, 0, 0, 0, 0}, {"AU1", "AU2"});
  const std::vector<double> probs{0.9, 0.1, 0.5, 0.2, 0.7, 0.3, 0.2, 0.4};
  const F1Report r = F1PerAu(probs, labels);
  EXPECT_NEAR(r.per_au[0], 0.8, 1e-15);
  EXPECT_EQ(r.per_au[1], 0.0);
  EXPECT_NEAR(r.macro, 0.4, 1e-15);
  EXPECT_EQ(r.names[1], "AU2");
  const F1Report perfect = F1PerAu(std::vector<double>{1, 0, 1, 0, 0, 0, 0, 0}, labels);
  EXPECT_EQ(perfect.per_au[0], 1.0);
  EXPECT_THROW(F1PerAu(std::vector<double>{0.5}, labels), Error);
}

TEST(ObjectivesTest, F1Formatting) {
  F1Report r;
  r.names = {"AU1", "AU2"};
  r.per_au = {0.5, 0.66666};
  r.macro = 0.58333;
  EXPECT_EQ(FormatF1Table(r, "MCM", "rgb"),
            "Methods     | Modal  |    AU1    AU2 |    Avg\n"
            "MCM         | rgb    |   50.0   66.7 |   58.3\n");
  EXPECT_EQ(FormatF1Csv(r, "MCM", "rgb"), "method,modal,AU1,AU2,avg\nMCM,rgb,50.00,66.67,58.33\n");
}

}  // namespace
}  // namespace mcm

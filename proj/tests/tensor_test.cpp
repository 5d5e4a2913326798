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
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <gtest/gtest.h>

#include "mcm/error.hpp"
#include "mcm/rng.hpp"
#include "mcm/tensor.hpp"

namespace mcm {
namespace {

using boost::multiprecision::cpp_dec_float_50;

Tensor RandomTensor(Shape shape, std::uint64_t seed, bool grad = false) {
  Rng rng(seed);
  std::vector<double> v(ShapeNumel(shape));
  for (auto& x : v) x = rng.Normal();
  return Tensor::FromData(std::move(shape), std::move(v), grad);
}

TEST(TensorTest, ConstructionAndShape) {
  const Tensor t = Tensor::Full({2, 3}, 1.5);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(ShapeToString(t.shape()), "[2x3]");
  EXPECT_DOUBLE_EQ(t[4], 1.5);
  EXPECT_THROW(Tensor::FromData({2, 2}, {1, 2, 3}), Error);
  EXPECT_THROW(t.item(), Error);
  EXPECT_DOUBLE_EQ(Tensor::Scalar(3.0).item(), 3.0);
}

TEST(TensorTest, ElementwiseShapeMismatchIsDimensionError) {
  const Tensor a = Tensor::Zeros({2, 3});
  const Tensor b = Tensor::Zeros({3, 2});
  try {
    Add(a, b);
    FAIL() << "expected a dimension error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
  EXPECT_THROW(Matmul(a, a), Error);
  EXPECT_THROW(AddBias(a, Tensor::Zeros({2})), Error);
}

TEST(TensorTest, MatmulMatchesBruteForce) {
  const Tensor a = RandomTensor({5, 7}, 1);
  const Tensor b = RandomTensor({7, 3}, 2);
  const Tensor c = Matmul(a, b);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      long double acc = 0;
      for (std::size_t k = 0; k < 7; ++k) acc += (long double)a[i * 7 + k] * b[k * 3 + j];
      EXPECT_NEAR(c[i * 3 + j], static_cast<double>(acc), 1e-13);
    }
}

TEST(TensorTest, SoftmaxMatchesHighPrecision) {
  const Tensor x = Tensor::FromData({2, 4}, {1000.0, 999.0, -3.0, 0.5, 0.1, -0.2, 0.3, 0.0});
  const Tensor y = SoftmaxLastDim(x);
  for (std::size_t r = 0; r < 2; ++r) {
    cpp_dec_float_50 denom = 0;
    for (std::size_t k = 0; k < 4; ++k) denom += boost::multiprecision::exp(cpp_dec_float_50(x[r * 4 + k]));
    double row = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      const cpp_dec_float_50 ref = boost::multiprecision::exp(cpp_dec_float_50(x[r * 4 + k])) / denom;
      EXPECT_NEAR(y[r * 4 + k], ref.convert_to<double>(), 1e-15);
      row += y[r * 4 + k];
    }
    EXPECT_NEAR(row, 1.0, 1e-15);
  }
}

TEST(TensorTest, GeluMatchesTanhFormInHighPrecision) {
  const std::vector<double> xs{-4.0, -1.0, -0.1, 0.0, 0.3, 1.0, 2.5};
  const Tensor y = Gelu(Tensor::FromData({xs.size()}, xs));
  const cpp_dec_float_50 pi = boost::math::constants::pi<cpp_dec_float_50>();
  const cpp_dec_float_50 c = boost::multiprecision::sqrt(cpp_dec_float_50(2) / pi);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const cpp_dec_float_50 x = xs[i];
    const cpp_dec_float_50 ref =
        cpp_dec_float_50(0.5) * x * (1 + boost::multiprecision::tanh(c * (x + cpp_dec_float_50("0.044715") * x * x * x)));
    EXPECT_NEAR(y[i], ref.convert_to<double>(), 1e-15);
  }
}

TEST(TensorTest, LayerNormNormalizesLastAxis) {
  const Tensor x = RandomTensor({3, 2, 6}, 3);
  const Tensor y = LayerNorm(x, Tensor::Full({6}, 1.0), Tensor::Zeros({6}), 1e-12);
  for (std::size_t r = 0; r < 6; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t k = 0; k < 6; ++k) mean += y[r * 6 + k] / 6.0;
    for (std::size_t k = 0; k < 6; ++k) var += (y[r * 6 + k] - mean) * (y[r * 6 + k] - mean) / 6.0;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-9);
  }
}

TEST(TensorTest, ReshapeConcatSliceRoundTrip) {
  const Tensor a = RandomTensor({4, 3}, 4);
  const Tensor b = RandomTensor({2, 3}, 5);
  const Tensor cat = ConcatRows({a, b});
  ASSERT_EQ(cat.shape(), (Shape{6, 3}));
  const Tensor back = SliceRows(cat, 4, 6);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(back[i], b[i]);
  const Tensor cols = ConcatCols({a, SliceCols(a, 0, 1)});
  EXPECT_EQ(cols.shape(), (Shape{4, 4}));
  EXPECT_EQ(cols[3], a[0]);
  EXPECT_THROW(Reshape(a, {5, 2}), Error);
  EXPECT_THROW(SliceRows(a, 3, 5), Error);
}

TEST(TensorTest, GatherRowsAccumulatesRepeatedIndices) {
  const Tensor a = Tensor::FromData({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  const std::size_t idx[] = {1, 1, 2};
  const Tensor g = GatherRows(a, idx);
  EXPECT_EQ(g[0], 3.0);
  EXPECT_EQ(g[5], 6.0);
  Backward(Sum(g));
  const std::vector<double> expected{0, 0, 2, 2, 1, 1};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(a.grad()[i], expected[i]);
  const std::size_t bad[] = {3};
  EXPECT_THROW(GatherRows(a, bad), Error);
}

TEST(TensorTest, BackwardOnMatmulChain) {
  const Tensor a = Tensor::FromData({1, 2}, {1.0, 2.0}, true);
  const Tensor w = Tensor::FromData({2, 1}, {3.0, 4.0}, true);
  Backward(Matmul(a, w));
  EXPECT_EQ(a.grad()[0], 3.0);
  EXPECT_EQ(a.grad()[1], 4.0);
  EXPECT_EQ(w.grad()[0], 1.0);
  EXPECT_EQ(w.grad()[1], 2.0);
}

TEST(TensorTest, GradientsAccumulateAcrossGraphsUntilZeroed) {
  const Tensor x = Tensor::FromData({2}, {1.0, -2.0}, true);
  Backward(Sum(Mul(x, x)));
  Backward(Sum(Scale(x, 3.0)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0 + 3.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -4.0 + 3.0);
  Tensor(x).ZeroGrad();
  EXPECT_TRUE(x.grad().empty());
}

TEST(TensorTest, BackwardTwiceIsStateError) {
  const Tensor x = Tensor::FromData({2}, {1.0, 2.0}, true);
  const Tensor loss = Sum(Gelu(x));
  Backward(loss);
  try {
    Backward(loss);
    FAIL() << "expected a state error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kState);
  }
}

TEST(TensorTest, NonScalarBackwardIsContractError) {
  const Tensor x = Tensor::FromData({2}, {1.0, 2.0}, true);
  try {
    Backward(Scale(x, 2.0));
    FAIL() << "expected a contract error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kContract);
  }
}

TEST(TensorTest, NoGradGuardStopsRecording) {
  const Tensor x = Tensor::FromData({2}, {1.0, 2.0}, true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(GradEnabled());
    EXPECT_FALSE(Sum(x).requires_grad());
  }
  EXPECT_TRUE(GradEnabled());
  EXPECT_TRUE(Sum(x).requires_grad());
}

TEST(TensorTest, DetachCopiesWithoutHistory) {
  const Tensor x = Tensor::FromData({2}, {1.0, 2.0}, true);
  const Tensor y = Scale(x, 2.0);
  const Tensor d = y.Detach();
  EXPECT_TRUE(d.is_leaf());
  EXPECT_FALSE(d.requires_grad());
  EXPECT_FALSE(d.SameStorage(y));
  EXPECT_EQ(d[1], 4.0);
}

TEST(TensorTest, MeanRowsAndTranspose) {
  const Tensor a = Tensor::FromData({2, 3}, {1, 2, 3, 5, 6, 7});
  const Tensor m = MeanRows(a);
  EXPECT_EQ(m.shape(), (Shape{1, 3}));
  EXPECT_DOUBLE_EQ(m[0], 3.0);
  EXPECT_DOUBLE_EQ(m[2], 5.0);
  const Tensor t = Transpose(a);
  EXPECT_EQ(t.shape(), (Shape{3, 2}));
  EXPECT_EQ(t[1], 5.0);
  EXPECT_DOUBLE_EQ(Mean(a).item(), 4.0);
}

}  // namespace
}  // namespace mcm

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
#ifndef MCM_TENSOR_HPP_
#define MCM_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mcm {

using Shape = std::vector<std::size_t>;

std::size_t ShapeNumel(const Shape& shape);
std::string ShapeToString(const Shape& shape);

class Tensor;

namespace internal {

// One value in the dynamic graph. Interior nodes keep their parents and a
// backward closure until the graph is consumed by Backward().
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  bool consumed = false;
  std::uint64_t seq = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  // Returns the grad buffer, allocating zeros on first use.
  std::vector<double>& GradBuffer();
};

// Records an op result. `backward_fn` reads the result's grad and adds into
// the parents' grads; it is only kept when some parent requires grad and
// recording is enabled.
Tensor MakeResult(const char* op, Shape shape, std::vector<double> data,
                  std::vector<std::shared_ptr<Node>> parents,
                  std::function<void(Node&)> backward_fn);

}  // namespace internal

// Dense row-major float64 tensor with an optional gradient slot. Copies share
// the underlying storage; use Clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Full(Shape shape, double value, bool requires_grad = false);
  static Tensor FromData(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor Scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Direct mutation is only legal on leaves; it does not invalidate
  // recorded graphs that already captured the old values.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void ZeroGrad();

  // New leaf with the same values and no graph history.
  Tensor Detach() const;
  Tensor Clone() const { return Detach(); }

  bool SameStorage(const Tensor& other) const { return node_ == other.node_; }

  // Library-internal access for op implementations.
  const std::shared_ptr<internal::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<internal::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<internal::Node> node_;
};

// Graph recording is enabled by default; this guard disables it on the
// current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool GradEnabled();

// Elementwise, same shape.
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Scale(const Tensor& a, double factor);
// x[..., n] + bias[n], broadcast over all leading axes.
Tensor AddBias(const Tensor& x, const Tensor& bias);
// GELU, tanh form: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor Gelu(const Tensor& x);

// 2-D only.
Tensor Matmul(const Tensor& a, const Tensor& b);
Tensor Transpose(const Tensor& a);

Tensor Reshape(const Tensor& a, Shape shape);
Tensor ConcatRows(const std::vector<Tensor>& parts);
Tensor ConcatCols(const std::vector<Tensor>& parts);
Tensor SliceRows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor SliceCols(const Tensor& a, std::size_t begin, std::size_t end);
// out[i, :] = a[indices[i], :]; repeated indices accumulate in backward.
Tensor GatherRows(const Tensor& a, std::span<const std::size_t> indices);

Tensor Sum(const Tensor& a);
Tensor Mean(const Tensor& a);
// Column means of a 2-D tensor, shape [1 x n].
Tensor MeanRows(const Tensor& a);

Tensor SoftmaxLastDim(const Tensor& x);
Tensor LayerNorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

// Runs reverse-mode accumulation from a scalar. Every requires_grad leaf
// reachable from `loss` receives d loss / d leaf added to its grad. The graph
// is released afterwards; a second call on it is a state error.
void Backward(const Tensor& loss);

}  // namespace mcm

#endif  // MCM_TENSOR_HPP_

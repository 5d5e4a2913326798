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
#include "mcm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "mcm/error.hpp"

namespace mcm {

using internal::Node;
using NodePtr = std::shared_ptr<Node>;

std::size_t ShapeNumel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

std::vector<double>& Node::GradBuffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

namespace {

thread_local bool g_grad_enabled = true;
thread_local std::uint64_t g_next_seq = 1;

void CheckShape(const Shape& shape) {
  for (std::size_t d : shape) {
    Require(d > 0, ErrorKind::kDimension,
            "tensor dimensions must be positive, got " + ShapeToString(shape));
  }
}

NodePtr NewNode(Shape shape, std::vector<double> data) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->seq = g_next_seq++;
  return node;
}

}  // namespace

Tensor internal::MakeResult(const char* op, Shape shape, std::vector<double> data,
                            std::vector<NodePtr> parents,
                            std::function<void(Node&)> backward_fn) {
  NodePtr node = NewNode(std::move(shape), std::move(data));
  node->op = op;
  node->is_leaf = false;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

using internal::MakeResult;

namespace {

const NodePtr& N(const Tensor& t) {
  Require(t.defined(), ErrorKind::kContract, "operation on an undefined tensor");
  return t.node();
}

void RequireSameShape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    Fail(ErrorKind::kDimension, std::string(op) + ": shape mismatch " +
                                    ShapeToString(a.shape()) + " vs " + ShapeToString(b.shape()));
  }
}

void RequireRank2(const char* op, const Tensor& a) {
  if (a.rank() != 2) {
    Fail(ErrorKind::kDimension,
         std::string(op) + ": expected a 2-D tensor, got " + ShapeToString(a.shape()));
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

}  // namespace

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  return Full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::Full(Shape shape, double value, bool requires_grad) {
  CheckShape(shape);
  std::vector<double> data(ShapeNumel(shape), value);
  Tensor t(NewNode(std::move(shape), std::move(data)));
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::FromData(Shape shape, std::vector<double> data, bool requires_grad) {
  CheckShape(shape);
  Require(ShapeNumel(shape) == data.size(), ErrorKind::kDimension,
          "FromData: shape " + ShapeToString(shape) + " needs " +
              std::to_string(ShapeNumel(shape)) + " values, got " + std::to_string(data.size()));
  Tensor t(NewNode(std::move(shape), std::move(data)));
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::Scalar(double value, bool requires_grad) {
  return FromData({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return N(*this)->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  Require(axis < s.size(), ErrorKind::kDimension,
          "axis " + std::to_string(axis) + " out of range for " + ShapeToString(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return N(*this)->data.size(); }
std::span<const double> Tensor::data() const { return N(*this)->data; }
std::span<double> Tensor::mutable_data() { return N(*this)->data; }

double Tensor::item() const {
  Require(numel() == 1, ErrorKind::kContract,
          "item() on non-scalar tensor " + ShapeToString(shape()));
  return data()[0];
}

bool Tensor::requires_grad() const { return N(*this)->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  Require(is_leaf(), ErrorKind::kContract, "requires_grad can only be set on leaves");
  node_->requires_grad = value;
}

bool Tensor::is_leaf() const { return N(*this)->is_leaf; }
bool Tensor::has_grad() const { return !N(*this)->grad.empty(); }
std::span<const double> Tensor::grad() const { return N(*this)->grad; }
std::span<double> Tensor::mutable_grad() { return N(*this)->GradBuffer(); }
void Tensor::ZeroGrad() { N(*this)->grad.clear(); }

Tensor Tensor::Detach() const {
  return Tensor(NewNode(shape(), N(*this)->data));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool GradEnabled() { return g_grad_enabled; }

// ---- elementwise -------------------------------------------------------------

Tensor Add(const Tensor& a, const Tensor& b) {
  RequireSameShape("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return MakeResult("add", a.shape(), std::move(out), {N(a), N(b)}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->GradBuffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  RequireSameShape("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return MakeResult("sub", a.shape(), std::move(out), {N(a), N(b)}, [](Node& self) {
    const double sign[2] = {1.0, -1.0};
    for (std::size_t k = 0; k < 2; ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      auto& g = p->GradBuffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[k] * self.grad[i];
    }
  });
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  RequireSameShape("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return MakeResult("mul", a.shape(), std::move(out), {N(a), N(b)}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.GradBuffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.GradBuffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor Scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return MakeResult("scale", a.shape(), std::move(out), {N(a)}, [factor](Node& self) {
    auto& g = self.parents[0]->GradBuffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor AddBias(const Tensor& x, const Tensor& bias) {
  const std::size_t n = bias.numel();
  if (bias.rank() != 1 || x.shape().back() != n) {
    Fail(ErrorKind::kDimension, "add_bias: bias " + ShapeToString(bias.shape()) +
                                    " does not match last axis of " + ShapeToString(x.shape()));
  }
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + bias[i % n];
  return MakeResult("add_bias", x.shape(), std::move(out), {N(x), N(bias)}, [n](Node& self) {
    Node& px = *self.parents[0];
    Node& pb = *self.parents[1];
    if (px.requires_grad) {
      auto& g = px.GradBuffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.GradBuffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
    }
  });
}

Tensor Gelu(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x[i];
    out[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  }
  return MakeResult("gelu", x.shape(), std::move(out), {N(x)}, [](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.GradBuffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = p.data[i];
      const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      g[i] += self.grad[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
    }
  });
}

// ---- linear algebra ------------------------------------------------------------

namespace {

// out[m x n] += a[m x k] * b[k x n], with optional transposes on either side
// expressed through strides.
void Gemm(std::size_t m, std::size_t k, std::size_t n, const double* a, std::size_t a_row,
          std::size_t a_col, const double* b, std::size_t b_row, std::size_t b_col, double* out) {
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * a_row + p * a_col];
      if (av == 0.0) continue;
      const double* brow = b + p * b_row;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j * b_col];
    }
  }
}

}  // namespace

Tensor Matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    Fail(ErrorKind::kDimension, "matmul: cannot multiply " + ShapeToString(a.shape()) + " by " +
                                    ShapeToString(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  Gemm(m, k, n, a.data().data(), k, 1, b.data().data(), n, 1, out.data());
  return MakeResult("matmul", {m, n}, std::move(out), {N(a), N(b)}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double* g = self.grad.data();
    if (pa.requires_grad) {
      // da[m x k] += g[m x n] * b^T
      Gemm(m, n, k, g, n, 1, pb.data.data(), 1, n, pa.GradBuffer().data());
    }
    if (pb.requires_grad) {
      // db[k x n] += a^T * g
      Gemm(k, m, n, pa.data.data(), 1, k, g, n, 1, pb.GradBuffer().data());
    }
  });
}

Tensor Transpose(const Tensor& a) {
  RequireRank2("transpose", a);
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  return MakeResult("transpose", {c, r}, std::move(out), {N(a)}, [r, c](Node& self) {
    auto& g = self.parents[0]->GradBuffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

// ---- layout ---------------------------------------------------------------------

Tensor Reshape(const Tensor& a, Shape shape) {
  CheckShape(shape);
  if (ShapeNumel(shape) != a.numel()) {
    Fail(ErrorKind::kDimension, "reshape: cannot view " + ShapeToString(a.shape()) + " as " +
                                    ShapeToString(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return MakeResult("reshape", std::move(shape), std::move(out), {N(a)}, [](Node& self) {
    auto& g = self.parents[0]->GradBuffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor ConcatRows(const std::vector<Tensor>& parts) {
  Require(!parts.empty(), ErrorKind::kContract, "concat_rows: no inputs");
  const std::size_t cols = parts[0].rank() == 2 ? parts[0].dim(1) : 0;
  std::size_t rows = 0;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.dim(1) != cols) {
      Fail(ErrorKind::kDimension, "concat_rows: part " + ShapeToString(p.shape()) +
                                      " does not match column count " + std::to_string(cols));
    }
    rows += p.dim(0);
    parents.push_back(N(p));
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return MakeResult("concat_rows", {rows, cols}, std::move(out), std::move(parents),
                    [](Node& self) {
                      std::size_t offset = 0;
                      for (auto& p : self.parents) {
                        if (p->requires_grad) {
                          auto& g = p->GradBuffer();
                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offset + i];
                        }
                        offset += p->data.size();
                      }
                    });
}

Tensor ConcatCols(const std::vector<Tensor>& parts) {
  Require(!parts.empty(), ErrorKind::kContract, "concat_cols: no inputs");
  const std::size_t rows = parts[0].rank() == 2 ? parts[0].dim(0) : 0;
  std::size_t cols = 0;
  std::vector<NodePtr> parents;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.dim(0) != rows) {
      Fail(ErrorKind::kDimension, "concat_cols: part " + ShapeToString(p.shape()) +
                                      " does not match row count " + std::to_string(rows));
    }
    cols += p.dim(1);
    widths.push_back(p.dim(1));
    parents.push_back(N(p));
  }
  std::vector<double> out(rows * cols);
  std::size_t c0 = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t w = widths[k];
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * cols + c0 + j] = parts[k][i * w + j];
    c0 += w;
  }
  return MakeResult("concat_cols", {rows, cols}, std::move(out), std::move(parents),
                    [rows, cols, widths](Node& self) {
                      std::size_t c = 0;
                      for (std::size_t k = 0; k < widths.size(); ++k) {
                        const std::size_t w = widths[k];
                        auto& p = self.parents[k];
                        if (p->requires_grad) {
                          auto& g = p->GradBuffer();
                          for (std::size_t i = 0; i < rows; ++i)
                            for (std::size_t j = 0; j < w; ++j)
                              g[i * w + j] += self.grad[i * cols + c + j];
                        }
                        c += w;
                      }
                    });
}

Tensor SliceRows(const Tensor& a, std::size_t begin, std::size_t end) {
  RequireRank2("slice_rows", a);
  Require(begin < end && end <= a.dim(0), ErrorKind::kDimension,
          "slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
              ") invalid for " + ShapeToString(a.shape()));
  const std::size_t cols = a.dim(1);
  std::vector<double> out(a.data().begin() + begin * cols, a.data().begin() + end * cols);
  return MakeResult("slice_rows", {end - begin, cols}, std::move(out), {N(a)},
                    [begin, cols](Node& self) {
                      auto& g = self.parents[0]->GradBuffer();
                      for (std::size_t i = 0; i < self.grad.size(); ++i)
                        g[begin * cols + i] += self.grad[i];
                    });
}

Tensor SliceCols(const Tensor& a, std::size_t begin, std::size_t end) {
  RequireRank2("slice_cols", a);
  Require(begin < end && end <= a.dim(1), ErrorKind::kDimension,
          "slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
              ") invalid for " + ShapeToString(a.shape()));
  const std::size_t rows = a.dim(0), cols = a.dim(1), w = end - begin;
  std::vector<double> out(rows * w);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = a[i * cols + begin + j];
  return MakeResult("slice_cols", {rows, w}, std::move(out), {N(a)},
                    [rows, cols, begin, w](Node& self) {
                      auto& g = self.parents[0]->GradBuffer();
                      for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < w; ++j)
                          g[i * cols + begin + j] += self.grad[i * w + j];
                    });
}

Tensor GatherRows(const Tensor& a, std::span<const std::size_t> indices) {
  RequireRank2("gather_rows", a);
  Require(!indices.empty(), ErrorKind::kContract, "gather_rows: empty index list");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<double> out(idx.size() * cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    Require(idx[i] < rows, ErrorKind::kDimension,
            "gather_rows: index " + std::to_string(idx[i]) + " out of range for " +
                ShapeToString(a.shape()));
    std::copy_n(a.data().begin() + idx[i] * cols, cols, out.begin() + i * cols);
  }
  const std::size_t n = idx.size();
  return MakeResult("gather_rows", {n, cols}, std::move(out), {N(a)},
                    [idx = std::move(idx), cols](Node& self) {
                      auto& g = self.parents[0]->GradBuffer();
                      for (std::size_t i = 0; i < idx.size(); ++i)
                        for (std::size_t j = 0; j < cols; ++j)
                          g[idx[i] * cols + j] += self.grad[i * cols + j];
                    });
}

// ---- reductions -------------------------------------------------------------------

Tensor Sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return MakeResult("sum", {1}, {s}, {N(a)}, [](Node& self) {
    auto& g = self.parents[0]->GradBuffer();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor Mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double inv = 1.0 / static_cast<double>(a.numel());
  return MakeResult("mean", {1}, {s * inv}, {N(a)}, [inv](Node& self) {
    auto& g = self.parents[0]->GradBuffer();
    for (double& v : g) v += self.grad[0] * inv;
  });
}

Tensor MeanRows(const Tensor& a) {
  RequireRank2("mean_rows", a);
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  const double inv = 1.0 / static_cast<double>(rows);
  std::vector<double> out(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j] += a[i * cols + j];
  for (double& v : out) v *= inv;
  return MakeResult("mean_rows", {1, cols}, std::move(out), {N(a)},
                    [rows, cols, inv](Node& self) {
                      auto& g = self.parents[0]->GradBuffer();
                      for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < cols; ++j)
                          g[i * cols + j] += self.grad[j] * inv;
                    });
}

// ---- normalization ----------------------------------------------------------------

Tensor SoftmaxLastDim(const Tensor& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * n;
    double* o = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      s += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= s;
  }
  return MakeResult("softmax", x.shape(), std::move(out), {N(x)}, [rows, n](Node& self) {
    auto& g = self.parents[0]->GradBuffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * n;
      const double* dy = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) g[r * n + j] += y[j] * (dy[j] - dot);
    }
  });
}

Tensor LayerNorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t d = x.shape().back();
  if (gamma.rank() != 1 || beta.rank() != 1 || gamma.numel() != d || beta.numel() != d) {
    Fail(ErrorKind::kDimension, "layer_norm: gamma " + ShapeToString(gamma.shape()) + " / beta " +
                                    ShapeToString(beta.shape()) + " do not match last axis of " +
                                    ShapeToString(x.shape()));
  }
  Require(eps > 0.0, ErrorKind::kContract, "layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / d;
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (in[j] - mu) * inv_std[r];
      out[r * d + j] = xhat[r * d + j] * gamma[j] + beta[j];
    }
  }
  return MakeResult(
      "layer_norm", x.shape(), std::move(out), {N(x), N(gamma), N(beta)},
      [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        const double* dy = self.grad.data();
        if (pg.requires_grad) {
          auto& g = pg.GradBuffer();
          for (std::size_t i = 0; i < rows * d; ++i) g[i % d] += dy[i] * xhat[i];
        }
        if (pb.requires_grad) {
          auto& g = pb.GradBuffer();
          for (std::size_t i = 0; i < rows * d; ++i) g[i % d] += dy[i];
        }
        if (px.requires_grad) {
          auto& g = px.GradBuffer();
          std::vector<double> dxhat(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              dxhat[j] = dy[r * d + j] * pg.data[j];
              mean_dxhat += dxhat[j];
              mean_dxhat_xhat += dxhat[j] * xhat[r * d + j];
            }
            mean_dxhat /= static_cast<double>(d);
            mean_dxhat_xhat /= static_cast<double>(d);
            for (std::size_t j = 0; j < d; ++j) {
              g[r * d + j] +=
                  inv_std[r] * (dxhat[j] - mean_dxhat - xhat[r * d + j] * mean_dxhat_xhat);
            }
          }
        }
      });
}

// ---- backward ---------------------------------------------------------------------

void Backward(const Tensor& loss) {
  const NodePtr& root = N(loss);
  Require(root->data.size() == 1, ErrorKind::kContract,
          "backward: loss must be a scalar, got " + ShapeToString(root->shape));
  Require(!root->consumed, ErrorKind::kState,
          "backward: this graph has already been consumed by a previous backward()");
  Require(root->requires_grad, ErrorKind::kContract,
          "backward: loss does not depend on any tensor that requires grad");

  std::vector<NodePtr> order;
  std::vector<NodePtr> stack{root};
  std::unordered_set<const Node*> seen{root.get()};
  while (!stack.empty()) {
    NodePtr n = std::move(stack.back());
    stack.pop_back();
    for (auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
    }
    order.push_back(std::move(n));
  }
  std::sort(order.begin(), order.end(),
            [](const NodePtr& a, const NodePtr& b) { return a->seq > b->seq; });

  root->GradBuffer()[0] += 1.0;
  for (const NodePtr& n : order) {
    if (n->is_leaf || !n->backward_fn) continue;
    if (n->grad.empty()) continue;  // no gradient reached this node
    n->backward_fn(*n);
  }
  for (const NodePtr& n : order) {
    if (n->is_leaf) continue;
    n->consumed = true;
    n->backward_fn = nullptr;
    n->parents.clear();
    if (n != root) n->grad.clear();
  }
}

}  // namespace mcm

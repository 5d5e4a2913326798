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
#ifndef MCM_OBJECTIVES_HPP_
#define MCM_OBJECTIVES_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcm/fusion.hpp"
#include "mcm/tensor.hpp"

namespace mcm {

// Squared-error reconstruction over masked patches only. Each modality term
// is the mean over (masked patches x pixel values); total = rgb + depth.
struct ReconLoss {
  Tensor total;
  Tensor rgb;
  Tensor depth;
};

// With no masked patches every term is a constant 0 and a warning is logged.
ReconLoss ReconstructionLoss(const Tensor& pred_rgb, const Tensor& pred_depth,
                             const Tensor& target_rgb, const Tensor& target_depth,
                             const MaskPlan& mask);

// N x K binary occurrence matrix, row-major.
class AuLabelMatrix {
 public:
  AuLabelMatrix() = default;
  AuLabelMatrix(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> values,
                std::vector<std::string> names = {});

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint8_t at(std::size_t i, std::size_t k) const { return values_[i * cols_ + k]; }
  std::span<const std::uint8_t> values() const { return values_; }
  const std::vector<std::string>& names() const { return names_; }

  // Rows in the given order; used to build batch label matrices.
  AuLabelMatrix SelectRows(std::span<const std::size_t> rows) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> values_;
  std::vector<std::string> names_;
};

struct AuWeights {
  std::vector<double> p;
  bool floored = false;
};

// P(AU_k) = sum_i y_ik / sum_i sum_k y_ik and p_k = P(AU_k) / min_j P(AU_j).
// An AU with no positives gets P floored at 1 / (sum_i sum_k y_ik + K).
// With `invert`, p_k = max_j P(AU_j) / P(AU_k) instead.
AuWeights ComputeAuWeights(const AuLabelMatrix& labels, bool invert = false);

// Clamp applied to sigmoid outputs before taking logs.
inline constexpr double kBceEpsilon = 1e-7;

// -(1/N) sum_i sum_k [p_k y log(yhat) + (1 - y) log(1 - yhat)],
// yhat = clamp(sigmoid(logit), eps, 1 - eps). Logits are [N x K].
Tensor WeightedBce(const Tensor& logits, const AuLabelMatrix& labels, const AuWeights& weights);

double Sigmoid(double x);

struct F1Report {
  std::vector<std::string> names;
  std::vector<double> per_au;
  double macro = 0.0;
};

// Positive prediction means prob >= threshold. F1 = 2TP / (2TP + FP + FN),
// defined as 0 when the denominator is 0.
F1Report F1PerAu(std::span<const double> probs, const AuLabelMatrix& labels,
                 double threshold = 0.5);

// One-row table in the layout "Method | Modal | AU... | Avg", scores in
// percent with one decimal.
std::string FormatF1Table(const F1Report& report, const std::string& method,
                          const std::string& modal);
// Same columns as CSV; scores in percent with two decimals.
std::string FormatF1Csv(const F1Report& report, const std::string& method,
                        const std::string& modal);

}  // namespace mcm

#endif  // MCM_OBJECTIVES_HPP_

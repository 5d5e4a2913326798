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
#include "mcm/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mcm/error.hpp"
#include "mcm/log.hpp"

namespace mcm {

namespace {

Tensor MaskedMse(const Tensor& pred, const Tensor& target, const MaskPlan& mask) {
  Tensor diff = Sub(GatherRows(pred, mask.masked), GatherRows(target, mask.masked));
  return Mean(Mul(diff, diff));
}

void RequireMatch(const Tensor& pred, const Tensor& target, const MaskPlan& mask,
                  const char* what) {
  if (pred.shape() != target.shape() || pred.rank() != 2 ||
      pred.dim(0) != mask.num_patches()) {
    Fail(ErrorKind::kDimension, std::string("recon_loss ") + what + ": prediction " +
                                    ShapeToString(pred.shape()) + ", target " +
                                    ShapeToString(target.shape()) + ", mask covers " +
                                    std::to_string(mask.num_patches()) + " patches");
  }
}

std::string Percent(double v, int decimals) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, 100.0 * v);
  return buf;
}

std::string AuName(const F1Report& r, std::size_t k) {
  return k < r.names.size() ? r.names[k] : "AU" + std::to_string(k + 1);
}

}  // namespace

ReconLoss ReconstructionLoss(const Tensor& pred_rgb, const Tensor& pred_depth,
                             const Tensor& target_rgb, const Tensor& target_depth,
                             const MaskPlan& mask) {
  RequireMatch(pred_rgb, target_rgb, mask, "rgb");
  RequireMatch(pred_depth, target_depth, mask, "depth");
  if (mask.masked.empty()) {
    LogWarning("recon_loss: no masked patches, loss defined as 0");
    return ReconLoss{Tensor::Scalar(0.0), Tensor::Scalar(0.0), Tensor::Scalar(0.0)};
  }
  Tensor rgb = MaskedMse(pred_rgb, target_rgb, mask);
  Tensor depth = MaskedMse(pred_depth, target_depth, mask);
  return ReconLoss{Add(rgb, depth), rgb, depth};
}

AuLabelMatrix::AuLabelMatrix(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> values,
                             std::vector<std::string> names)
    : rows_(rows), cols_(cols), values_(std::move(values)), names_(std::move(names)) {
  Require(rows >= 1 && cols >= 1, ErrorKind::kContract, "label matrix must be at least 1 x 1");
  Require(values_.size() == rows * cols, ErrorKind::kDimension,
          "label matrix: " + std::to_string(values_.size()) + " values for " +
              std::to_string(rows) + " x " + std::to_string(cols));
  for (auto v : values_)
    Require(v <= 1, ErrorKind::kData, "label matrix entries must be 0 or 1");
  Require(names_.empty() || names_.size() == cols, ErrorKind::kDimension,
          "label matrix: name count does not match column count");
}

AuLabelMatrix AuLabelMatrix::SelectRows(std::span<const std::size_t> rows) const {
  std::vector<std::uint8_t> out;
  out.reserve(rows.size() * cols_);
  for (auto r : rows) {
    Require(r < rows_, ErrorKind::kDimension, "label row out of range");
    out.insert(out.end(), values_.begin() + r * cols_, values_.begin() + (r + 1) * cols_);
  }
  return AuLabelMatrix(rows.size(), cols_, std::move(out), names_);
}

AuWeights ComputeAuWeights(const AuLabelMatrix& labels, bool invert) {
  const std::size_t k = labels.cols();
  std::vector<double> counts(k, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.rows(); ++i)
    for (std::size_t j = 0; j < k; ++j) counts[j] += labels.at(i, j);
  for (double c : counts) total += c;
  Require(total > 0.0, ErrorKind::kContract, "au_weights: label matrix has no positive entries");
  AuWeights w;
  std::vector<double> prob(k);
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] == 0.0) {
      prob[j] = 1.0 / (total + static_cast<double>(k));
      w.floored = true;
      LogWarning("au_weights: AU column " + std::to_string(j) +
                 " has no positive samples; occurrence floored at 1/(total+K)");
    } else {
      prob[j] = counts[j] / total;
    }
  }
  const double lo = *std::min_element(prob.begin(), prob.end());
  const double hi = *std::max_element(prob.begin(), prob.end());
  w.p.resize(k);
  for (std::size_t j = 0; j < k; ++j) w.p[j] = invert ? hi / prob[j] : prob[j] / lo;
  return w;
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

const double kLogEps = std::log(kBceEpsilon);
const double kLog1mEps = std::log1p(-kBceEpsilon);
const double kLogitClamp = kLog1mEps - kLogEps;

double Softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

Tensor WeightedBce(const Tensor& logits, const AuLabelMatrix& labels, const AuWeights& weights) {
  if (logits.rank() != 2 || logits.dim(0) != labels.rows() || logits.dim(1) != labels.cols() ||
      weights.p.size() != labels.cols()) {
    Fail(ErrorKind::kDimension, "weighted_bce: logits " + ShapeToString(logits.shape()) +
                                    ", labels " + std::to_string(labels.rows()) + "x" +
                                    std::to_string(labels.cols()) + ", weights " +
                                    std::to_string(weights.p.size()));
  }
  const std::size_t n = labels.rows(), k = labels.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> dlogit(n * k);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double z = logits[i * k + j];
      Require(!std::isnan(z), ErrorKind::kNumeric, "weighted_bce: NaN logit at (" +
                                                       std::to_string(i) + ", " +
                                                       std::to_string(j) + ")");
      const double s = Sigmoid(z);
      const double y = labels.at(i, j);
      const double pk = weights.p[j];
      // log(yhat) and log(1 - yhat) without forming 1 - s.
      double log_p, log_q;
      const bool clamped = z <= -kLogitClamp || z >= kLogitClamp;
      if (z <= -kLogitClamp) {
        log_p = kLogEps;
        log_q = kLog1mEps;
      } else if (z >= kLogitClamp) {
        log_p = kLog1mEps;
        log_q = kLogEps;
      } else {
        log_p = -Softplus(-z);
        log_q = -Softplus(z);
      }
      loss -= pk * y * log_p + (1.0 - y) * log_q;
      // d/dz of the term; the clamp has zero slope where it is active.
      dlogit[i * k + j] = clamped ? 0.0 : -(pk * y * (1.0 - s) - (1.0 - y) * s) * inv_n;
    }
  loss *= inv_n;
  return internal::MakeResult("weighted_bce", {1}, {loss}, {logits.node()},
                              [dlogit = std::move(dlogit)](internal::Node& self) {
                                auto& g = self.parents[0]->GradBuffer();
                                for (std::size_t i = 0; i < g.size(); ++i)
                                  g[i] += self.grad[0] * dlogit[i];
                              });
}

F1Report F1PerAu(std::span<const double> probs, const AuLabelMatrix& labels, double threshold) {
  const std::size_t n = labels.rows(), k = labels.cols();
  Require(probs.size() == n * k, ErrorKind::kDimension,
          "f1: " + std::to_string(probs.size()) + " predictions for " + std::to_string(n) + "x" +
              std::to_string(k) + " labels");
  F1Report r;
  r.names = labels.names();
  r.per_au.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool pred = probs[i * k + j] >= threshold;
      const bool truth = labels.at(i, j) == 1;
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    const std::size_t denom = 2 * tp + fp + fn;
    r.per_au[j] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  double s = 0.0;
  for (double f : r.per_au) s += f;
  r.macro = s / static_cast<double>(k);
  return r;
}

std::string FormatF1Table(const F1Report& report, const std::string& method,
                          const std::string& modal) {
  std::ostringstream head, row;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-12s| %-7s|", "Methods", "Modal");
  head << buf;
  std::snprintf(buf, sizeof buf, "%-12s| %-7s|", method.c_str(), modal.c_str());
  row << buf;
  for (std::size_t k = 0; k < report.per_au.size(); ++k) {
    std::snprintf(buf, sizeof buf, " %6s", AuName(report, k).c_str());
    head << buf;
    std::snprintf(buf, sizeof buf, " %6s", Percent(report.per_au[k], 1).c_str());
    row << buf;
  }
  std::snprintf(buf, sizeof buf, " | %6s", "Avg");
  head << buf;
  std::snprintf(buf, sizeof buf, " | %6s", Percent(report.macro, 1).c_str());
  row << buf;
  return head.str() + "\n" + row.str() + "\n";
}

std::string FormatF1Csv(const F1Report& report, const std::string& method,
                        const std::string& modal) {
  std::ostringstream os;
  os << "method,modal";
  for (std::size_t k = 0; k < report.per_au.size(); ++k) os << "," << AuName(report, k);
  os << ",avg\n" << method << "," << modal;
  for (double f : report.per_au) os << "," << Percent(f, 2);
  os << "," << Percent(report.macro, 2) << "\n";
  return os.str();
}

}  // namespace mcm

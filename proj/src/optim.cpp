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
#include "mcm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mcm/error.hpp"

namespace mcm {

OptState OptState::ForSlots(std::span<const ParamSlot> slots, const AdamWHyper& hyper) {
  OptState s;
  s.hyper = hyper;
  for (const auto& slot : slots) {
    s.m.emplace_back(slot.param.numel(), 0.0);
    s.v.emplace_back(slot.param.numel(), 0.0);
  }
  return s;
}

void AdamWStep(std::span<ParamSlot> slots, OptState& state, double lr) {
  Require(state.m.size() == slots.size() && state.v.size() == slots.size(), ErrorKind::kContract,
          "adamw: optimizer state does not match the parameter list");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const ParamSlot& slot = slots[i];
    Require(slot.param.has_grad(), ErrorKind::kContract,
            "adamw: parameter '" + slot.name + "' has no gradient");
    Require(state.m[i].size() == slot.param.numel(), ErrorKind::kDimension,
            "adamw: moment size mismatch for '" + slot.name + "'");
    for (double g : slot.param.grad()) {
      Require(std::isfinite(g), ErrorKind::kNumeric,
              "adamw: non-finite gradient in parameter '" + slot.name + "'");
    }
  }
  const AdamWHyper& h = state.hyper;
  const double t = static_cast<double>(state.step + 1);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    ParamSlot& slot = slots[i];
    const double lr_eff = lr * slot.lr_scale;
    const double shrink = slot.decay ? 1.0 - lr_eff * h.weight_decay : 1.0;
    auto p = slot.param.mutable_data();
    const auto g = slot.param.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] *= shrink;
      m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g[j];
      v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g[j] * g[j];
      p[j] -= lr_eff * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + h.eps);
    }
  }
  ++state.step;
}

void Schedule::Validate() const {
  Require(total_epochs >= 1, ErrorKind::kConfig, "epochs must be at least 1");
  Require(warmup_epochs < total_epochs, ErrorKind::kConfig,
          "warmup_epochs must be smaller than epochs");
  Require(steps_per_epoch >= 1, ErrorKind::kConfig, "steps per epoch must be at least 1");
  Require(base_lr > 0.0, ErrorKind::kConfig, "lr must be positive");
  Require(min_lr >= 0.0 && min_lr <= base_lr, ErrorKind::kConfig, "min_lr must lie in [0, lr]");
  Require(step_down_factor > 0.0 && step_down_factor <= 1.0, ErrorKind::kConfig,
          "lr_step_down_factor must lie in (0, 1]");
}

double LrAt(std::size_t step, const Schedule& s) {
  const std::size_t warm = s.warmup_steps();
  double lr;
  if (step < warm) {
    lr = s.base_lr * static_cast<double>(step) / static_cast<double>(warm);
  } else {
    const std::size_t total = s.total_steps();
    const double span = total > warm + 1 ? static_cast<double>(total - 1 - warm) : 1.0;
    const double progress = std::clamp(static_cast<double>(step - warm) / span, 0.0, 1.0);
    lr = s.min_lr +
         (s.base_lr - s.min_lr) * (1.0 + std::cos(std::numbers::pi * progress)) / 2.0;
  }
  if (s.step_down_epoch > 0 && step >= s.step_down_epoch * s.steps_per_epoch)
    lr *= s.step_down_factor;
  return lr;
}

double LayerwiseScale(std::size_t depth_index, std::size_t total_depths, double factor) {
  Require(factor > 0.0 && factor <= 1.0, ErrorKind::kContract,
          "layerwise_scale: factor must lie in (0, 1]");
  Require(depth_index <= total_depths, ErrorKind::kContract,
          "layerwise_scale: depth index exceeds total depth");
  return std::pow(factor, static_cast<double>(total_depths - depth_index));
}

}  // namespace mcm

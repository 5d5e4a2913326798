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
#ifndef MCM_OPTIM_HPP_
#define MCM_OPTIM_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcm/tensor.hpp"

namespace mcm {

struct AdamWHyper {
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
};

// A trained parameter with its per-parameter multipliers. `lr_scale` carries
// layer-wise decay; `decay` switches weight decay on or off for the tensor.
struct ParamSlot {
  std::string name;
  Tensor param;
  double lr_scale = 1.0;
  bool decay = true;
};

struct OptState {
  AdamWHyper hyper;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  static OptState ForSlots(std::span<const ParamSlot> slots, const AdamWHyper& hyper);
};

// One AdamW update at learning rate `lr`, t = state.step + 1:
//   p <- p - lr_eff * wd * p                      (decoupled decay)
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   p <- p - lr_eff * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// with lr_eff = lr * slot.lr_scale. Every slot must hold a gradient.
void AdamWStep(std::span<ParamSlot> slots, OptState& state, double lr);

struct Schedule {
  double base_lr = 2e-4;
  double min_lr = 1e-6;
  std::size_t warmup_epochs = 5;
  std::size_t total_epochs = 30;
  std::size_t steps_per_epoch = 1;
  // Multiplies the rate by `step_down_factor` once `step_down_epoch` starts;
  // 0 disables.
  std::size_t step_down_epoch = 0;
  double step_down_factor = 0.1;

  std::size_t warmup_steps() const { return warmup_epochs * steps_per_epoch; }
  std::size_t total_steps() const { return total_epochs * steps_per_epoch; }
  void Validate() const;
};

// Linear ramp 0 -> base over the warmup steps, then
//   min + (base - min) (1 + cos(pi * progress)) / 2,
//   progress = (step - warmup) / (total - 1 - warmup), clamped to [0, 1],
// so the last step of the run (total - 1) lands on min_lr.
double LrAt(std::size_t step, const Schedule& schedule);

// factor^(total_depths - depth_index).
double LayerwiseScale(std::size_t depth_index, std::size_t total_depths, double factor);

}  // namespace mcm

#endif  // MCM_OPTIM_HPP_

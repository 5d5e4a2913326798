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
#ifndef MCM_GRADCHECK_HPP_
#define MCM_GRADCHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mcm/tensor.hpp"

namespace mcm {

// Builds a scalar loss from the given leaves. Called once with gradients
// recorded, then repeatedly under NoGradGuard for the finite differences.
using LossFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradcheckCase {
  std::string name;
  double max_error = 0.0;
  std::size_t elements = 0;
  bool passed = false;
};

// Largest |analytic - numeric| / max(1, |analytic|) over every element of
// every input, with central differences of step h.
double MaxGradientError(const LossFn& loss, const std::vector<Tensor>& inputs, double h,
                        std::size_t* elements = nullptr);

// Every differentiable op, the transformer block, the objectives and the
// full pretraining and finetuning losses of a two-patch model.
std::vector<GradcheckCase> RunGradchecks(std::uint64_t seed = 0, double h = 1e-5,
                                         double tolerance = 1e-4);

}  // namespace mcm

#endif  // MCM_GRADCHECK_HPP_

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
#ifndef MCM_CHECKPOINT_HPP_
#define MCM_CHECKPOINT_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mcm/config.hpp"
#include "mcm/optim.hpp"
#include "mcm/vit.hpp"

namespace mcm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

// Binary layout, little-endian throughout:
//   "MCM1"                      magic
//   u32 version                 currently 1
//   u32 n, n bytes              config echo (RunConfig::Serialize text)
//   u8  has_optimizer, [u64 optimizer step]
//   u32 tensor count
//   per tensor: u32 name length, name, u8 dtype (1 = f32), u32 ndim,
//               ndim x u32 dims, prod(dims) x f32 payload
// Optimizer moments, when present, are extra tensors named "opt.m/<param>"
// and "opt.v/<param>".
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config_text;
  bool has_optimizer = false;
  std::uint64_t optimizer_step = 0;
  std::vector<NamedArray> tensors;

  const NamedArray* Find(const std::string& name) const;
  RunConfig Config() const;
};

std::vector<std::uint8_t> EncodeCheckpoint(const Checkpoint& checkpoint);
Checkpoint DecodeCheckpoint(std::span<const std::uint8_t> bytes);
void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint LoadCheckpoint(const std::string& path);

// Every parameter leaf in ModelParams::Named() order, plus the optimizer
// moments of `slots` when `state` is given.
Checkpoint MakeCheckpoint(const ModelParams& params, const RunConfig& config,
                          const OptState* state = nullptr,
                          std::span<const ParamSlot> slots = {});

// Copies checkpoint tensors into `params` for every parameter name accepted
// by `select`. Missing names, unknown model tensors and shape mismatches are
// format errors.
void RestoreParams(const Checkpoint& checkpoint, ModelParams& params,
                   const std::function<bool(const std::string&)>& select = nullptr);

// Rebuilds a model from a checkpoint's own config echo.
Model LoadModel(const Checkpoint& checkpoint);

}  // namespace mcm

#endif  // MCM_CHECKPOINT_HPP_

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
#ifndef MCM_CONFIG_HPP_
#define MCM_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mcm/optim.hpp"
#include "mcm/vit.hpp"

namespace mcm {

inline constexpr int kConfigVersion = 1;

// Everything a command needs. The text form is one `key = value` per line;
// `#` starts a comment. Keys are listed by RunConfig::Keys() and documented
// in the README.
struct RunConfig {
  ModelConfig model;

  double mask_ratio = 0.5;
  // Draw a new channel-mixing plan per sample every epoch; when false each
  // sample keeps one plan for the whole run.
  bool mix_fresh_per_step = true;

  std::string modality = "rgb";
  bool invert_weights = false;
  // Fusion evaluation with the depth channel replaced by zeros.
  bool zero_depth = false;

  double lr = 1e-3;
  double min_lr = 1e-6;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  std::size_t warmup_epochs = 5;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double layer_decay = 1.0;
  std::size_t lr_step_down_epoch = 0;
  double lr_step_down_factor = 0.1;

  std::uint64_t seed = 0;
  std::size_t save_every = 1;

  std::string train_manifest;
  std::string val_manifest;
  std::string out_dir = "runs";

  static RunConfig PretrainDefaults();
  static RunConfig FinetuneDefaults();

  static const std::vector<std::string>& Keys();
  // Unknown keys and unparsable values raise config errors naming the key.
  void Set(std::string_view key, std::string_view value);
  std::string Get(std::string_view key) const;

  // Applies every line of `text` on top of the current values.
  void Merge(std::string_view text);
  void MergeFile(const std::string& path);

  // Canonical text: "config_version = 1" followed by every key in Keys()
  // order. Parsing it back reproduces the config exactly.
  std::string Serialize() const;

  void Validate() const;

  Schedule MakeSchedule(std::size_t steps_per_epoch) const;
  AdamWHyper MakeHyper() const;
};

// Model keys whose values differ between two configs, each formatted as
// "key: a=<x> b=<y>". `skip` lists keys to ignore.
std::vector<std::string> DiffModelConfig(const ModelConfig& a, const ModelConfig& b,
                                         const std::vector<std::string>& skip = {});

}  // namespace mcm

#endif  // MCM_CONFIG_HPP_

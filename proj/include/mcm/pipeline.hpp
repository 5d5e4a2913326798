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
#ifndef MCM_PIPELINE_HPP_
#define MCM_PIPELINE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcm/config.hpp"
#include "mcm/data_io.hpp"
#include "mcm/objectives.hpp"
#include "mcm/vit.hpp"

namespace mcm {

// One pretraining sample: mix -> mask -> encode -> decode x2 -> loss. The
// targets are the unmixed rgb and depth patches.
ReconLoss PretrainSampleLoss(const Model& model, const ImagePair& pair, const MixPlan& mix,
                             const MaskPlan& mask);

struct PretrainStepLog {
  std::size_t step = 0;
  double lr = 0.0;
  double loss_rgb = 0.0;
  double loss_depth = 0.0;
  double loss_total = 0.0;
};

struct PretrainResult {
  std::vector<PretrainStepLog> log;
  std::string checkpoint_path;
  std::string log_path;
};

// Writes <out_dir>/pretrain_log.csv ("step,lr,loss_rgb,loss_depth,loss_total"),
// <out_dir>/pretrain_epochNNNN.bin every save_every epochs and the final
// <out_dir>/pretrain.bin.
PretrainResult RunPretrain(const RunConfig& config);

struct FinetuneEpochLog {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_f1 = 0.0;
  double val_f1 = 0.0;
};

struct FinetuneResult {
  std::vector<FinetuneEpochLog> log;
  std::string checkpoint_path;
  std::string log_path;
};

// Initializes the encoder and patch embedding from `init_checkpoint`, trains
// them with a fresh AU head under weighted BCE. Writes
// <out_dir>/finetune_log.csv ("epoch,step,lr,train_loss,train_f1,val_f1"),
// epoch checkpoints and <out_dir>/finetune.bin. val_f1 is computed on
// val_manifest, or on the training set when none is configured.
FinetuneResult RunFinetune(const RunConfig& config, const std::string& init_checkpoint);

// Probabilities of every AU for every sample, row-major [N x K]. Fusion
// inputs use Rng streams DeriveSeed(seed, kEvalMix, 0, sample index); with
// zero_depth the depth channel is replaced by zeros first.
std::vector<double> PredictProbabilities(const Model& model, const Dataset& dataset,
                                         Modality modality, bool zero_depth, std::uint64_t seed);

F1Report Evaluate(const Model& model, const Dataset& dataset, Modality modality, bool zero_depth,
                  std::uint64_t seed);

F1Report RunEval(const std::string& checkpoint_path, const std::string& manifest_path,
                 const std::string& modality, bool zero_depth);

// For each ratio writes <out_prefix>_mNN_{masked,rgb,depth} (NN = ratio in
// percent). The mixing plan and mask come from `seed`; the mask stream is
// shared across ratios, so larger ratios mask a superset. Returns all paths.
std::vector<std::string> RunReconstruct(const std::string& checkpoint_path,
                                        const std::string& rgb_path, const std::string& depth_path,
                                        std::span<const double> ratios, std::uint64_t seed,
                                        const std::string& out_prefix);

}  // namespace mcm

#endif  // MCM_PIPELINE_HPP_

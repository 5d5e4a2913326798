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
#include "mcm/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "mcm/checkpoint.hpp"
#include "mcm/error.hpp"
#include "mcm/log.hpp"
#include "mcm/optim.hpp"
#include "mcm/rng.hpp"

namespace fs = std::filesystem;

namespace mcm {

namespace {

bool StartsWith(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create output directory '" + dir + "': " + ec.message());
}

std::string Join(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

std::string EpochName(const char* stem, std::size_t epoch) {
  std::string n = std::to_string(epoch);
  return std::string(stem) + "_epoch" + std::string(n.size() < 4 ? 4 - n.size() : 0, '0') + n +
         ".bin";
}

Dataset LoadRequiredDataset(const std::string& manifest_path, const char* what,
                            bool require_labels, const ModelConfig& model) {
  Require(!manifest_path.empty(), ErrorKind::kConfig, std::string(what) + " is required");
  const DatasetManifest manifest = LoadManifest(manifest_path);
  Require(!manifest.records.empty(), ErrorKind::kConfig,
          std::string(what) + ": dataset '" + manifest_path + "' is empty");
  Dataset ds = LoadDataset(manifest, require_labels);
  for (const auto& s : ds.samples) {
    if (s.pair.height() != model.image_h || s.pair.width() != model.image_w) {
      Fail(ErrorKind::kConfig, std::string(what) + ": image '" + s.id + "' is " +
                                   std::to_string(s.pair.width()) + "x" +
                                   std::to_string(s.pair.height()) + ", config expects " +
                                   std::to_string(model.image_w) + "x" +
                                   std::to_string(model.image_h));
    }
  }
  if (require_labels) {
    Require(ds.labels->cols() == model.num_aus, ErrorKind::kConfig,
            std::string(what) + ": labels have " + std::to_string(ds.labels->cols()) +
                " AU columns, num_aus is " + std::to_string(model.num_aus));
  }
  return ds;
}

void ZeroGrads(std::span<ParamSlot> slots) {
  for (auto& s : slots) s.param.ZeroGrad();
}

Tensor AuInputImage(const ImagePair& pair, Modality modality, bool zero_depth) {
  switch (modality) {
    case Modality::kRgb: return pair.rgb;
    case Modality::kDepth:
      return zero_depth ? Tensor::Zeros(pair.depth.shape()) : pair.depth;
    case Modality::kFusion:
      return Fuse(zero_depth ? ImagePair{pair.rgb, Tensor::Zeros(pair.depth.shape())} : pair);
  }
  Fail(ErrorKind::kContract, "bad modality");
}

}  // namespace

ReconLoss PretrainSampleLoss(const Model& model, const ImagePair& pair, const MixPlan& mix,
                             const MaskPlan& mask) {
  const std::size_t p = model.config().patch;
  const Tensor mixed = ChannelMix(Patchify(Fuse(pair), p), mix);
  const Tensor encoded = model.Encode(mixed, mask);
  const Tensor pred_rgb = model.Decode(encoded, mask, Reconstruction::kRgb);
  const Tensor pred_depth = model.Decode(encoded, mask, Reconstruction::kDepth);
  return ReconstructionLoss(pred_rgb, pred_depth, Patchify(pair.rgb, p), Patchify(pair.depth, p),
                            mask);
}

PretrainResult RunPretrain(const RunConfig& config) {
  config.Validate();
  const Dataset data = LoadRequiredDataset(config.train_manifest, "train_manifest", false,
                                           config.model);
  EnsureDir(config.out_dir);

  Model model(config.model, config.seed);
  std::vector<ParamSlot> slots;
  for (auto& [name, t] : model.params().Named()) {
    if (StartsWith(name, "au_head")) continue;
    slots.push_back(ParamSlot{name, t, 1.0, t.rank() >= 2});
  }
  OptState state = OptState::ForSlots(slots, config.MakeHyper());

  const std::size_t n = data.samples.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const Schedule schedule = config.MakeSchedule(steps_per_epoch);
  schedule.Validate();
  const std::size_t l = config.model.num_patches();

  PretrainResult result;
  result.log_path = Join(config.out_dir, "pretrain_log.csv");
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& batch : MakeBatches(n, config.batch_size, config.seed, epoch)) {
      ZeroGrads(slots);
      std::vector<Tensor> totals, rgbs, depths;
      for (std::size_t idx : batch) {
        const MixPlan mix = SampleMixPlan(
            l, DeriveSeed(config.seed, StreamKind::kMix, config.mix_fresh_per_step ? epoch : 0, idx));
        const MaskPlan mask =
            SampleMaskPlan(l, config.mask_ratio, DeriveSeed(config.seed, StreamKind::kMask, epoch, idx));
        ReconLoss loss = PretrainSampleLoss(model, data.samples[idx].pair, mix, mask);
        totals.push_back(loss.total);
        rgbs.push_back(loss.rgb);
        depths.push_back(loss.depth);
      }
      const double inv = 1.0 / static_cast<double>(batch.size());
      Tensor sum = totals[0];
      for (std::size_t i = 1; i < totals.size(); ++i) sum = Add(sum, totals[i]);
      const Tensor batch_loss = Scale(sum, inv);
      PretrainStepLog entry;
      entry.step = step;
      entry.lr = LrAt(step, schedule);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        entry.loss_rgb += rgbs[i].item() * inv;
        entry.loss_depth += depths[i].item() * inv;
      }
      entry.loss_total = batch_loss.item();
      if (batch_loss.requires_grad()) {
        Backward(batch_loss);
        AdamWStep(slots, state, entry.lr);
      }
      result.log.push_back(entry);
      ++step;
    }
    if (config.save_every > 0 && (epoch + 1) % config.save_every == 0) {
      SaveCheckpoint(Join(config.out_dir, EpochName("pretrain", epoch + 1)),
                     MakeCheckpoint(model.params(), config, &state, slots));
    }
  }

  std::ostringstream csv;
  csv << "step,lr,loss_rgb,loss_depth,loss_total\n";
  for (const auto& e : result.log) {
    csv << e.step << "," << FormatDouble(e.lr) << "," << FormatDouble(e.loss_rgb) << ","
        << FormatDouble(e.loss_depth) << "," << FormatDouble(e.loss_total) << "\n";
  }
  WriteTextFile(result.log_path, csv.str());
  result.checkpoint_path = Join(config.out_dir, "pretrain.bin");
  SaveCheckpoint(result.checkpoint_path, MakeCheckpoint(model.params(), config, &state, slots));
  return result;
}

std::vector<double> PredictProbabilities(const Model& model, const Dataset& dataset,
                                         Modality modality, bool zero_depth, std::uint64_t seed) {
  NoGradGuard no_grad;
  const std::size_t l = model.config().num_patches();
  std::vector<double> probs;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const Tensor image = AuInputImage(dataset.samples[i].pair, modality, zero_depth);
    const MixPlan plan = SampleMixPlan(l, DeriveSeed(seed, StreamKind::kEvalMix, 0, i));
    const Tensor logits = model.AuLogits(image, modality, &plan);
    for (double z : logits.data()) probs.push_back(Sigmoid(z));
  }
  return probs;
}

F1Report Evaluate(const Model& model, const Dataset& dataset, Modality modality, bool zero_depth,
                  std::uint64_t seed) {
  Require(dataset.labels.has_value(), ErrorKind::kConfig, "evaluation needs labels");
  return F1PerAu(PredictProbabilities(model, dataset, modality, zero_depth, seed), *dataset.labels);
}

FinetuneResult RunFinetune(const RunConfig& config, const std::string& init_checkpoint) {
  config.Validate();
  const Modality modality = ParseModality(config.modality);
  Require(!init_checkpoint.empty() && fs::exists(init_checkpoint), ErrorKind::kConfig,
          "init checkpoint '" + init_checkpoint + "' does not exist");
  const Checkpoint pretrained = LoadCheckpoint(init_checkpoint);
  const RunConfig pre_config = pretrained.Config();
  const auto diff = DiffModelConfig(pre_config.model, config.model, {"num_aus"});
  if (!diff.empty()) {
    std::string msg = "checkpoint model config does not match (a=checkpoint, b=config):";
    for (const auto& d : diff) msg += "\n  " + d;
    Fail(ErrorKind::kConfig, msg);
  }

  const Dataset train = LoadRequiredDataset(config.train_manifest, "train_manifest", true,
                                            config.model);
  const bool has_val = !config.val_manifest.empty();
  const Dataset val =
      has_val ? LoadRequiredDataset(config.val_manifest, "val_manifest", true, config.model)
              : Dataset{};
  EnsureDir(config.out_dir);

  ModelParams params = InitModelParams(config.model, config.seed);
  RestoreParams(pretrained, params, [](const std::string& name) {
    return StartsWith(name, "patch_embed") || StartsWith(name, "encoder.");
  });
  Model model(config.model, std::move(params));

  const std::size_t depth_total = config.model.enc_depth + 1;
  std::vector<ParamSlot> slots;
  for (auto& [name, t] : model.params().Named()) {
    std::size_t depth_index;
    if (StartsWith(name, "patch_embed")) {
      depth_index = 0;
    } else if (StartsWith(name, "encoder.")) {
      depth_index = std::stoul(name.substr(8, name.find('.', 8) - 8)) + 1;
    } else if (StartsWith(name, "au_head")) {
      depth_index = depth_total;
    } else {
      continue;
    }
    slots.push_back(ParamSlot{name, t, LayerwiseScale(depth_index, depth_total, config.layer_decay),
                              t.rank() >= 2});
  }
  OptState state = OptState::ForSlots(slots, config.MakeHyper());
  const AuWeights weights = ComputeAuWeights(*train.labels, config.invert_weights);

  const std::size_t n = train.samples.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const Schedule schedule = config.MakeSchedule(steps_per_epoch);
  schedule.Validate();
  const std::size_t l = config.model.num_patches();

  FinetuneResult result;
  result.log_path = Join(config.out_dir, "finetune_log.csv");
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0, lr = 0.0;
    std::size_t batches = 0;
    for (const auto& batch : MakeBatches(n, config.batch_size, config.seed, epoch)) {
      ZeroGrads(slots);
      std::vector<Tensor> rows;
      for (std::size_t idx : batch) {
        const Tensor image = AuInputImage(train.samples[idx].pair, modality, false);
        const MixPlan plan = SampleMixPlan(
            l, DeriveSeed(config.seed, StreamKind::kMix, config.mix_fresh_per_step ? epoch : 0, idx));
        rows.push_back(model.AuLogits(image, modality, &plan));
      }
      const Tensor loss = WeightedBce(ConcatRows(rows), train.labels->SelectRows(batch), weights);
      lr = LrAt(step, schedule);
      Backward(loss);
      AdamWStep(slots, state, lr);
      loss_sum += loss.item();
      ++batches;
      ++step;
    }
    FinetuneEpochLog entry;
    entry.epoch = epoch + 1;
    entry.step = step;
    entry.lr = lr;
    entry.train_loss = loss_sum / static_cast<double>(batches);
    entry.train_f1 = Evaluate(model, train, modality, false, config.seed).macro;
    entry.val_f1 = has_val ? Evaluate(model, val, modality, config.zero_depth, config.seed).macro
                           : entry.train_f1;
    result.log.push_back(entry);
    LogInfo("finetune epoch " + std::to_string(entry.epoch) + ": loss " +
            FormatDouble(entry.train_loss) + ", train F1 " + FormatDouble(entry.train_f1) +
            ", val F1 " + FormatDouble(entry.val_f1));
    if (config.save_every > 0 && (epoch + 1) % config.save_every == 0) {
      SaveCheckpoint(Join(config.out_dir, EpochName("finetune", epoch + 1)),
                     MakeCheckpoint(model.params(), config, &state, slots));
    }
  }

  std::ostringstream csv;
  csv << "epoch,step,lr,train_loss,train_f1,val_f1\n";
  for (const auto& e : result.log) {
    csv << e.epoch << "," << e.step << "," << FormatDouble(e.lr) << ","
        << FormatDouble(e.train_loss) << "," << FormatDouble(e.train_f1) << ","
        << FormatDouble(e.val_f1) << "\n";
  }
  WriteTextFile(result.log_path, csv.str());
  result.checkpoint_path = Join(config.out_dir, "finetune.bin");
  SaveCheckpoint(result.checkpoint_path, MakeCheckpoint(model.params(), config, &state, slots));
  return result;
}

F1Report RunEval(const std::string& checkpoint_path, const std::string& manifest_path,
                 const std::string& modality, bool zero_depth) {
  const Modality mod = ParseModality(modality);
  Require(fs::exists(checkpoint_path), ErrorKind::kConfig,
          "checkpoint '" + checkpoint_path + "' does not exist");
  const Checkpoint ckpt = LoadCheckpoint(checkpoint_path);
  const Model model = LoadModel(ckpt);
  const Dataset data = LoadRequiredDataset(manifest_path, "manifest", true, model.config());
  return Evaluate(model, data, mod, zero_depth, ckpt.Config().seed);
}

std::vector<std::string> RunReconstruct(const std::string& checkpoint_path,
                                        const std::string& rgb_path, const std::string& depth_path,
                                        std::span<const double> ratios, std::uint64_t seed,
                                        const std::string& out_prefix) {
  Require(!ratios.empty(), ErrorKind::kConfig, "reconstruct: no mask ratios given");
  Require(fs::exists(checkpoint_path), ErrorKind::kConfig,
          "checkpoint '" + checkpoint_path + "' does not exist");
  const Model model = LoadModel(LoadCheckpoint(checkpoint_path));
  const ModelConfig& mc = model.config();
  const ImagePair pair = LoadPair(rgb_path, depth_path);
  Require(pair.height() == mc.image_h && pair.width() == mc.image_w, ErrorKind::kConfig,
          "reconstruct: image size does not match the checkpoint config");
  const std::size_t l = mc.num_patches();
  NoGradGuard no_grad;
  const Tensor mixed = ChannelMix(Patchify(Fuse(pair), mc.patch),
                                  SampleMixPlan(l, DeriveSeed(seed, StreamKind::kMix, 0, 0)));
  const fs::path parent = fs::path(out_prefix).parent_path();
  if (!parent.empty()) EnsureDir(parent.string());
  std::vector<std::string> paths;
  for (double ratio : ratios) {
    Require(ratio >= 0.0 && ratio < 1.0, ErrorKind::kConfig,
            "reconstruct: mask ratio " + FormatDouble(ratio) + " outside [0, 1)");
    const MaskPlan mask = SampleMaskPlan(l, ratio, DeriveSeed(seed, StreamKind::kMask, 0, 0));
    Require(!mask.visible.empty(), ErrorKind::kConfig,
            "reconstruct: mask ratio " + FormatDouble(ratio) + " leaves no visible patch");
    const Tensor encoded = model.Encode(mixed, mask);
    const Tensor rgb = model.Decode(encoded, mask, Reconstruction::kRgb);
    const Tensor depth = model.Decode(encoded, mask, Reconstruction::kDepth);
    const std::string tag = "_m" + std::to_string(std::lround(ratio * 100.0));
    for (auto& p : DumpReconstruction(mixed, rgb, depth, mask, mc.image_h, mc.image_w, mc.patch,
                                      out_prefix + tag))
      paths.push_back(std::move(p));
  }
  return paths;
}

}  // namespace mcm

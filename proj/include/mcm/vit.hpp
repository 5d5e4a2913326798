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
#ifndef MCM_VIT_HPP_
#define MCM_VIT_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mcm/fusion.hpp"
#include "mcm/tensor.hpp"

namespace mcm {

struct ModelConfig {
  std::size_t image_h = 32;
  std::size_t image_w = 32;
  std::size_t patch = 8;
  std::size_t dim = 64;
  std::size_t dec_dim = 32;
  std::size_t heads = 4;
  std::size_t dec_heads = 4;
  std::size_t enc_depth = 4;
  std::size_t dec_rgb_depth = 2;
  std::size_t dec_depth_depth = 1;
  std::size_t num_aus = 4;
  double ln_eps = 1e-6;

  std::size_t grid_h() const { return image_h / patch; }
  std::size_t grid_w() const { return image_w / patch; }
  std::size_t num_patches() const { return grid_h() * grid_w(); }
  std::size_t patch_width(std::size_t channels) const { return patch * patch * channels; }

  // Throws a config error naming the first offending field.
  void Validate() const;
};

// y = x * weight + bias, weight stored [in x out].
struct Linear {
  Tensor weight;
  Tensor bias;
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;
};

struct BlockParams {
  std::size_t heads = 1;
  Linear query, key, value, output;
  Linear ff_in, ff_out;  // d -> 4d -> d
  LayerNormParams norm_attn, norm_ff;

  std::size_t dim() const { return query.weight.dim(0); }
};

struct ModelParams {
  Linear patch_embed;
  std::vector<BlockParams> encoder;
  std::vector<BlockParams> dec_rgb;
  std::vector<BlockParams> dec_depth;
  Tensor mask_token_rgb;    // [d]
  Tensor mask_token_depth;  // [d]
  Linear dec_embed_rgb, dec_embed_depth;
  Linear head_rgb, head_depth;
  Linear au_head;

  // Every leaf in a fixed order. Names are dotted paths such as
  // "encoder.2.attn.query.weight"; the handles share storage with the tree.
  std::vector<std::pair<std::string, Tensor>> Named() const;
};

// Weights: truncated normal (stddev 0.02, cut at 2 stddev); biases zero;
// layer norm gamma 1 / beta 0; mask tokens truncated normal. The i-th entry
// of Named() draws from Rng(DeriveSeed(seed, kInit, i)).
ModelParams InitModelParams(const ModelConfig& config, std::uint64_t seed);

// Fixed 2-D sine-cosine table. Row r = i * grid_w + j holds
// [enc(i), enc(j)] where enc(x) has d/2 entries
//   enc(x)[k]       = sin(x * w_k),  enc(x)[d/4 + k] = cos(x * w_k),
//   w_k = 10000^(-2k / (d/2)),       k = 0 .. d/4 - 1.
struct PosEmbed {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  Tensor table;  // [L x d]
};

PosEmbed BuildPosEmbed(std::size_t grid_h, std::size_t grid_w, std::size_t dim);

// Per-head attention probabilities [T x T], filled when requested.
struct AttentionTrace {
  std::vector<Tensor> weights;
};

Tensor MultiHeadAttention(const Tensor& x, const BlockParams& params,
                          AttentionTrace* trace = nullptr);
Tensor FeedForward(const Tensor& x, const BlockParams& params);

// Post-norm block:
//   h   = LN_attn(x + MSA(x))
//   out = LN_ff(h + FF(h))
Tensor TransformerBlock(const Tensor& x, const BlockParams& params, double ln_eps,
                        AttentionTrace* trace = nullptr);

Tensor ApplyLinear(const Tensor& x, const Linear& layer);

// Embeds token rows of patch pixels, adds the given position rows and runs
// the encoder stack. Row order is free; attention only sees positions
// through the added embeddings.
Tensor EncodeTokens(const Tensor& patch_rows, const Tensor& pos_rows, const ModelParams& params,
                    double ln_eps);

// [L x (P*P*3)] mixed patches -> [V x d] for the visible patches only.
Tensor Encode(const Tensor& mixed_patches, const MaskPlan& mask, const ModelParams& params,
              const PosEmbed& pos, double ln_eps);

enum class Reconstruction { kRgb, kDepth };
Reconstruction ParseReconstruction(std::string_view tag);
std::size_t ReconstructionChannels(Reconstruction which);

// Full-length decoder input in encoder width: encoded rows at visible slots,
// the modality's mask token at masked slots. [L x d]
Tensor AssembleDecoderTokens(const Tensor& encoded, const MaskPlan& mask, Reconstruction which,
                             const ModelParams& params);

// [V x d] -> [L x (P*P*c)], c = 3 for rgb and 1 for depth.
Tensor Decode(const Tensor& encoded, const MaskPlan& mask, Reconstruction which,
              const ModelParams& params, const PosEmbed& dec_pos, double ln_eps);

enum class Modality { kRgb, kDepth, kFusion };
Modality ParseModality(std::string_view tag);
const char* ModalityName(Modality modality);

// Turns a raw input image into the 3-channel patch rows the encoder expects.
// rgb takes [H x W x 3]; depth takes [H x W x 1] and replicates it into three
// channels; fusion takes [H x W x 4] and applies `plan`.
Tensor PrepareAuInput(const Tensor& image, Modality modality, std::size_t patch,
                      const MixPlan* plan);

// Patchify, embed all patches without masking, encode, mean-pool the tokens
// and apply the AU head. Returns [1 x K] logits.
Tensor AuForward(const Tensor& image, Modality modality, const ModelParams& params,
                 const PosEmbed& pos, std::size_t patch, double ln_eps,
                 const MixPlan* plan = nullptr);

// Bundles config, parameters and the two position tables.
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);
  Model(const ModelConfig& config, ModelParams params);

  const ModelConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }
  const PosEmbed& encoder_pos() const { return enc_pos_; }
  const PosEmbed& decoder_pos() const { return dec_pos_; }

  Tensor Encode(const Tensor& mixed_patches, const MaskPlan& mask) const;
  Tensor Decode(const Tensor& encoded, const MaskPlan& mask, Reconstruction which) const;
  Tensor AuLogits(const Tensor& image, Modality modality, const MixPlan* plan = nullptr) const;

 private:
  ModelConfig config_;
  ModelParams params_;
  PosEmbed enc_pos_;
  PosEmbed dec_pos_;
};

}  // namespace mcm

#endif  // MCM_VIT_HPP_

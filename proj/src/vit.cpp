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
#include "mcm/vit.hpp"

#include <cmath>

#include "mcm/error.hpp"
#include "mcm/rng.hpp"

namespace mcm {

namespace {

void CheckPositive(std::size_t v, const char* field) {
  Require(v > 0, ErrorKind::kConfig, std::string(field) + " must be positive");
}

Linear MakeLinear(std::size_t in, std::size_t out) {
  return Linear{Tensor::Zeros({in, out}, true), Tensor::Zeros({out}, true)};
}

BlockParams MakeBlock(std::size_t d, std::size_t heads) {
  BlockParams b;
  b.heads = heads;
  b.query = MakeLinear(d, d);
  b.key = MakeLinear(d, d);
  b.value = MakeLinear(d, d);
  b.output = MakeLinear(d, d);
  b.ff_in = MakeLinear(d, 4 * d);
  b.ff_out = MakeLinear(4 * d, d);
  b.norm_attn = {Tensor::Full({d}, 1.0, true), Tensor::Zeros({d}, true)};
  b.norm_ff = {Tensor::Full({d}, 1.0, true), Tensor::Zeros({d}, true)};
  return b;
}

void AppendLinear(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                  const Linear& l) {
  out.emplace_back(prefix + ".weight", l.weight);
  out.emplace_back(prefix + ".bias", l.bias);
}

void AppendBlock(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                 const BlockParams& b) {
  AppendLinear(out, prefix + ".attn.query", b.query);
  AppendLinear(out, prefix + ".attn.key", b.key);
  AppendLinear(out, prefix + ".attn.value", b.value);
  AppendLinear(out, prefix + ".attn.output", b.output);
  out.emplace_back(prefix + ".norm_attn.gamma", b.norm_attn.gamma);
  out.emplace_back(prefix + ".norm_attn.beta", b.norm_attn.beta);
  AppendLinear(out, prefix + ".ff.in", b.ff_in);
  AppendLinear(out, prefix + ".ff.out", b.ff_out);
  out.emplace_back(prefix + ".norm_ff.gamma", b.norm_ff.gamma);
  out.emplace_back(prefix + ".norm_ff.beta", b.norm_ff.beta);
}

}  // namespace

void ModelConfig::Validate() const {
  CheckPositive(image_h, "image_h");
  CheckPositive(image_w, "image_w");
  CheckPositive(patch, "patch");
  CheckPositive(dim, "dim");
  CheckPositive(dec_dim, "dec_dim");
  CheckPositive(heads, "heads");
  CheckPositive(dec_heads, "dec_heads");
  CheckPositive(enc_depth, "enc_depth");
  CheckPositive(dec_rgb_depth, "dec_rgb_depth");
  CheckPositive(dec_depth_depth, "dec_depth_depth");
  CheckPositive(num_aus, "num_aus");
  Require(image_h % patch == 0, ErrorKind::kConfig, "image_h must be divisible by patch");
  Require(image_w % patch == 0, ErrorKind::kConfig, "image_w must be divisible by patch");
  Require(dim % heads == 0, ErrorKind::kConfig, "dim must be divisible by heads");
  Require(dec_dim % dec_heads == 0, ErrorKind::kConfig, "dec_dim must be divisible by dec_heads");
  Require(dim % 4 == 0, ErrorKind::kConfig, "dim must be divisible by 4");
  Require(dec_dim % 4 == 0, ErrorKind::kConfig, "dec_dim must be divisible by 4");
  Require(dec_rgb_depth > dec_depth_depth, ErrorKind::kConfig,
          "dec_rgb_depth must exceed dec_depth_depth");
  Require(ln_eps > 0.0, ErrorKind::kConfig, "ln_eps must be positive");
}

std::vector<std::pair<std::string, Tensor>> ModelParams::Named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  AppendLinear(out, "patch_embed", patch_embed);
  for (std::size_t i = 0; i < encoder.size(); ++i)
    AppendBlock(out, "encoder." + std::to_string(i), encoder[i]);
  out.emplace_back("mask_token_rgb", mask_token_rgb);
  out.emplace_back("mask_token_depth", mask_token_depth);
  AppendLinear(out, "dec_embed_rgb", dec_embed_rgb);
  AppendLinear(out, "dec_embed_depth", dec_embed_depth);
  for (std::size_t i = 0; i < dec_rgb.size(); ++i)
    AppendBlock(out, "dec_rgb." + std::to_string(i), dec_rgb[i]);
  for (std::size_t i = 0; i < dec_depth.size(); ++i)
    AppendBlock(out, "dec_depth." + std::to_string(i), dec_depth[i]);
  AppendLinear(out, "head_rgb", head_rgb);
  AppendLinear(out, "head_depth", head_depth);
  AppendLinear(out, "au_head", au_head);
  return out;
}

ModelParams InitModelParams(const ModelConfig& config, std::uint64_t seed) {
  config.Validate();
  const std::size_t d = config.dim, dd = config.dec_dim;
  ModelParams p;
  p.patch_embed = MakeLinear(config.patch_width(3), d);
  for (std::size_t i = 0; i < config.enc_depth; ++i) p.encoder.push_back(MakeBlock(d, config.heads));
  for (std::size_t i = 0; i < config.dec_rgb_depth; ++i)
    p.dec_rgb.push_back(MakeBlock(dd, config.dec_heads));
  for (std::size_t i = 0; i < config.dec_depth_depth; ++i)
    p.dec_depth.push_back(MakeBlock(dd, config.dec_heads));
  p.mask_token_rgb = Tensor::Zeros({d}, true);
  p.mask_token_depth = Tensor::Zeros({d}, true);
  p.dec_embed_rgb = MakeLinear(d, dd);
  p.dec_embed_depth = MakeLinear(d, dd);
  p.head_rgb = MakeLinear(dd, config.patch_width(3));
  p.head_depth = MakeLinear(dd, config.patch_width(1));
  p.au_head = MakeLinear(d, config.num_aus);

  auto named = p.Named();
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto& [name, t] = named[i];
    const bool random = t.rank() == 2 || name.rfind("mask_token", 0) == 0;
    if (!random) continue;  // biases, betas stay 0 and gammas stay 1
    Rng rng(DeriveSeed(seed, StreamKind::kInit, i));
    for (double& v : t.mutable_data()) v = rng.TruncatedNormal(0.02);
  }
  return p;
}

PosEmbed BuildPosEmbed(std::size_t grid_h, std::size_t grid_w, std::size_t dim) {
  Require(dim % 4 == 0 && dim > 0, ErrorKind::kContract,
          "build_pos_embed: dim must be a positive multiple of 4, got " + std::to_string(dim));
  Require(grid_h > 0 && grid_w > 0, ErrorKind::kContract, "build_pos_embed: empty grid");
  const std::size_t half = dim / 2, quarter = dim / 4;
  std::vector<double> omega(quarter);
  for (std::size_t k = 0; k < quarter; ++k)
    omega[k] = std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(half));
  std::vector<double> table(grid_h * grid_w * dim);
  for (std::size_t i = 0; i < grid_h; ++i)
    for (std::size_t j = 0; j < grid_w; ++j) {
      double* row = table.data() + (i * grid_w + j) * dim;
      const double coord[2] = {static_cast<double>(i), static_cast<double>(j)};
      for (std::size_t axis = 0; axis < 2; ++axis) {
        double* out = row + axis * half;
        for (std::size_t k = 0; k < quarter; ++k) {
          out[k] = std::sin(coord[axis] * omega[k]);
          out[quarter + k] = std::cos(coord[axis] * omega[k]);
        }
      }
    }
  return PosEmbed{grid_h, grid_w, Tensor::FromData({grid_h * grid_w, dim}, std::move(table))};
}

Tensor ApplyLinear(const Tensor& x, const Linear& layer) {
  return AddBias(Matmul(x, layer.weight), layer.bias);
}

Tensor MultiHeadAttention(const Tensor& x, const BlockParams& params, AttentionTrace* trace) {
  const std::size_t d = params.dim();
  if (x.rank() != 2 || x.dim(1) != d) {
    Fail(ErrorKind::kDimension, "attention: tokens " + ShapeToString(x.shape()) +
                                    " do not match block width " + std::to_string(d));
  }
  const std::size_t h = params.heads, dh = d / h;
  Tensor q = ApplyLinear(x, params.query);
  Tensor k = ApplyLinear(x, params.key);
  Tensor v = ApplyLinear(x, params.value);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  heads.reserve(h);
  if (trace) trace->weights.clear();
  for (std::size_t i = 0; i < h; ++i) {
    Tensor qi = SliceCols(q, i * dh, (i + 1) * dh);
    Tensor ki = SliceCols(k, i * dh, (i + 1) * dh);
    Tensor vi = SliceCols(v, i * dh, (i + 1) * dh);
    Tensor attn = SoftmaxLastDim(Scale(Matmul(qi, Transpose(ki)), scale));
    if (trace) trace->weights.push_back(attn);
    heads.push_back(Matmul(attn, vi));
  }
  Tensor merged = h == 1 ? heads[0] : ConcatCols(heads);
  return ApplyLinear(merged, params.output);
}

Tensor FeedForward(const Tensor& x, const BlockParams& params) {
  return ApplyLinear(Gelu(ApplyLinear(x, params.ff_in)), params.ff_out);
}

Tensor TransformerBlock(const Tensor& x, const BlockParams& params, double ln_eps,
                        AttentionTrace* trace) {
  Require(x.rank() == 2 && x.dim(0) >= 1, ErrorKind::kContract,
          "transformer_block: need at least one token");
  Tensor h = LayerNorm(Add(x, MultiHeadAttention(x, params, trace)), params.norm_attn.gamma,
                       params.norm_attn.beta, ln_eps);
  return LayerNorm(Add(h, FeedForward(h, params)), params.norm_ff.gamma, params.norm_ff.beta,
                   ln_eps);
}

Tensor EncodeTokens(const Tensor& patch_rows, const Tensor& pos_rows, const ModelParams& params,
                    double ln_eps) {
  Tensor w = Add(ApplyLinear(patch_rows, params.patch_embed), pos_rows);
  for (const auto& block : params.encoder) w = TransformerBlock(w, block, ln_eps);
  return w;
}

Tensor Encode(const Tensor& mixed_patches, const MaskPlan& mask, const ModelParams& params,
              const PosEmbed& pos, double ln_eps) {
  Require(mixed_patches.rank() == 2, ErrorKind::kDimension,
          "encode: expected [L x (P*P*3)] patches, got " + ShapeToString(mixed_patches.shape()));
  const std::size_t l = mixed_patches.dim(0);
  Require(mask.num_patches() == l && pos.table.dim(0) == l, ErrorKind::kContract,
          "encode: mask plan covers " + std::to_string(mask.num_patches()) +
              " patches, position table " + std::to_string(pos.table.dim(0)) + ", input has " +
              std::to_string(l));
  Require(!mask.visible.empty(), ErrorKind::kContract, "encode: no visible patches");
  return EncodeTokens(GatherRows(mixed_patches, mask.visible), GatherRows(pos.table, mask.visible),
                      params, ln_eps);
}

Reconstruction ParseReconstruction(std::string_view tag) {
  if (tag == "rgb") return Reconstruction::kRgb;
  if (tag == "depth") return Reconstruction::kDepth;
  Fail(ErrorKind::kContract, "unknown reconstruction modality '" + std::string(tag) + "'");
}

std::size_t ReconstructionChannels(Reconstruction which) {
  return which == Reconstruction::kRgb ? 3 : 1;
}

Tensor AssembleDecoderTokens(const Tensor& encoded, const MaskPlan& mask, Reconstruction which,
                             const ModelParams& params) {
  const std::size_t v = mask.visible.size();
  Require(encoded.rank() == 2 && encoded.dim(0) == v, ErrorKind::kContract,
          "decode: " + std::to_string(v) + " visible patches but encoded input is " +
              ShapeToString(encoded.shape()));
  const Tensor& token =
      which == Reconstruction::kRgb ? params.mask_token_rgb : params.mask_token_depth;
  const std::size_t d = token.numel();
  Tensor pool = ConcatRows({encoded, Reshape(token, {1, d})});
  std::vector<std::size_t> index(mask.num_patches(), v);
  for (std::size_t i = 0; i < v; ++i) index[mask.visible[i]] = i;
  return GatherRows(pool, index);
}

Tensor Decode(const Tensor& encoded, const MaskPlan& mask, Reconstruction which,
              const ModelParams& params, const PosEmbed& dec_pos, double ln_eps) {
  const bool rgb = which == Reconstruction::kRgb;
  Tensor tokens = AssembleDecoderTokens(encoded, mask, which, params);
  Require(dec_pos.table.dim(0) == mask.num_patches(), ErrorKind::kContract,
          "decode: decoder position table does not cover the mask plan");
  Tensor w = Add(ApplyLinear(tokens, rgb ? params.dec_embed_rgb : params.dec_embed_depth),
                 dec_pos.table);
  for (const auto& block : rgb ? params.dec_rgb : params.dec_depth)
    w = TransformerBlock(w, block, ln_eps);
  return ApplyLinear(w, rgb ? params.head_rgb : params.head_depth);
}

Modality ParseModality(std::string_view tag) {
  if (tag == "rgb") return Modality::kRgb;
  if (tag == "depth") return Modality::kDepth;
  if (tag == "fusion") return Modality::kFusion;
  Fail(ErrorKind::kConfig, "unknown modality '" + std::string(tag) +
                               "' (expected rgb, depth or fusion)");
}

const char* ModalityName(Modality modality) {
  switch (modality) {
    case Modality::kRgb: return "rgb";
    case Modality::kDepth: return "depth";
    case Modality::kFusion: return "fusion";
  }
  return "?";
}

Tensor PrepareAuInput(const Tensor& image, Modality modality, std::size_t patch,
                      const MixPlan* plan) {
  const std::size_t expected = modality == Modality::kRgb ? 3 : modality == Modality::kDepth ? 1 : 4;
  if (image.rank() != 3 || image.dim(2) != expected) {
    Fail(ErrorKind::kContract, std::string("au_forward: modality ") + ModalityName(modality) +
                                   " expects " + std::to_string(expected) +
                                   " channels, got image " + ShapeToString(image.shape()));
  }
  switch (modality) {
    case Modality::kRgb:
      return Patchify(image, patch);
    case Modality::kDepth: {
      const std::size_t h = image.dim(0), w = image.dim(1);
      std::vector<double> rep(h * w * 3);
      for (std::size_t i = 0; i < h * w; ++i) rep[i * 3] = rep[i * 3 + 1] = rep[i * 3 + 2] = image[i];
      return Patchify(Tensor::FromData({h, w, 3}, std::move(rep)), patch);
    }
    case Modality::kFusion: {
      Require(plan != nullptr, ErrorKind::kContract, "au_forward: fusion input needs a mix plan");
      return ChannelMix(Patchify(image, patch), *plan);
    }
  }
  Fail(ErrorKind::kContract, "au_forward: bad modality");
}

Tensor AuForward(const Tensor& image, Modality modality, const ModelParams& params,
                 const PosEmbed& pos, std::size_t patch, double ln_eps, const MixPlan* plan) {
  Tensor rows = PrepareAuInput(image, modality, patch, plan);
  Require(rows.dim(0) == pos.table.dim(0), ErrorKind::kContract,
          "au_forward: image yields " + std::to_string(rows.dim(0)) +
              " patches but the position table has " + std::to_string(pos.table.dim(0)));
  Tensor tokens = EncodeTokens(rows, pos.table, params, ln_eps);
  return ApplyLinear(MeanRows(tokens), params.au_head);
}

Model::Model(const ModelConfig& config, std::uint64_t seed)
    : Model(config, InitModelParams(config, seed)) {}

Model::Model(const ModelConfig& config, ModelParams params)
    : config_(config),
      params_(std::move(params)),
      enc_pos_(BuildPosEmbed(config.grid_h(), config.grid_w(), config.dim)),
      dec_pos_(BuildPosEmbed(config.grid_h(), config.grid_w(), config.dec_dim)) {
  config_.Validate();
}

Tensor Model::Encode(const Tensor& mixed_patches, const MaskPlan& mask) const {
  return mcm::Encode(mixed_patches, mask, params_, enc_pos_, config_.ln_eps);
}

Tensor Model::Decode(const Tensor& encoded, const MaskPlan& mask, Reconstruction which) const {
  return mcm::Decode(encoded, mask, which, params_, dec_pos_, config_.ln_eps);
}

Tensor Model::AuLogits(const Tensor& image, Modality modality, const MixPlan* plan) const {
  return AuForward(image, modality, params_, enc_pos_, config_.patch, config_.ln_eps, plan);
}

}  // namespace mcm

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
#include "mcm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mcm/fusion.hpp"
#include "mcm/objectives.hpp"
#include "mcm/pipeline.hpp"
#include "mcm/rng.hpp"
#include "mcm/vit.hpp"

namespace mcm {

double MaxGradientError(const LossFn& loss, const std::vector<Tensor>& inputs, double h,
                        std::size_t* elements) {
  for (const auto& t : inputs) {
    Tensor leaf = t;
    leaf.set_requires_grad(true);
    leaf.ZeroGrad();
  }
  Backward(loss(inputs));
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) {
    analytic.emplace_back(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.back().begin());
  }

  NoGradGuard no_grad;
  double worst = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor leaf = inputs[i];
    auto data = leaf.mutable_data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double saved = data[j];
      data[j] = saved + h;
      const double up = loss(inputs).item();
      data[j] = saved - h;
      const double down = loss(inputs).item();
      data[j] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i][j];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
      ++count;
    }
  }
  if (elements) *elements = count;
  return worst;
}

namespace {

Tensor Random(Rng& rng, Shape shape, double scale = 1.0, double offset = 0.0) {
  std::vector<double> v(ShapeNumel(shape));
  for (auto& x : v) x = offset + scale * rng.Normal();
  return Tensor::FromData(std::move(shape), std::move(v), true);
}

Tensor Positive(Rng& rng, Shape shape) {
  std::vector<double> v(ShapeNumel(shape));
  for (auto& x : v) x = 0.1 + 0.8 * rng.Uniform();
  return Tensor::FromData(std::move(shape), std::move(v), false);
}

// Contracts a non-scalar output with a fixed random tensor of the same shape.
LossFn Project(std::function<Tensor(const std::vector<Tensor>&)> op, Shape out_shape,
               std::uint64_t seed) {
  Rng rng(seed);
  Tensor r = Random(rng, std::move(out_shape));
  r.set_requires_grad(false);
  return [op = std::move(op), r](const std::vector<Tensor>& in) { return Sum(Mul(op(in), r)); };
}

ModelConfig TinyConfig() {
  ModelConfig c;
  c.image_h = 4;
  c.image_w = 8;
  c.patch = 4;
  c.dim = 8;
  c.dec_dim = 8;
  c.heads = 2;
  c.dec_heads = 2;
  c.enc_depth = 1;
  c.dec_rgb_depth = 2;
  c.dec_depth_depth = 1;
  c.num_aus = 2;
  return c;
}

// Parameters far from their initial scale, so nonlinear regions are exercised.
void Perturb(ModelParams& params, Rng& rng) {
  for (auto& [name, t] : params.Named()) {
    const bool gamma = name.size() >= 5 && name.compare(name.size() - 5, 5, "gamma") == 0;
    for (auto& x : t.mutable_data()) x = (gamma ? 1.0 : 0.0) + 0.3 * rng.Normal();
  }
}

std::vector<Tensor> Leaves(const ModelParams& params) {
  std::vector<Tensor> out;
  for (auto& [name, t] : params.Named()) out.push_back(t);
  return out;
}

BlockParams RandomBlock(Rng& rng, std::size_t d, std::size_t heads) {
  auto linear = [&](std::size_t in, std::size_t out) {
    return Linear{Random(rng, {in, out}, 0.4), Random(rng, {out}, 0.1)};
  };
  BlockParams b;
  b.heads = heads;
  b.query = linear(d, d);
  b.key = linear(d, d);
  b.value = linear(d, d);
  b.output = linear(d, d);
  b.ff_in = linear(d, 4 * d);
  b.ff_out = linear(4 * d, d);
  b.norm_attn = LayerNormParams{Random(rng, {d}, 0.2, 1.0), Random(rng, {d}, 0.1)};
  b.norm_ff = LayerNormParams{Random(rng, {d}, 0.2, 1.0), Random(rng, {d}, 0.1)};
  return b;
}

std::vector<Tensor> BlockLeaves(const BlockParams& b) {
  return {b.query.weight,  b.query.bias,     b.key.weight,       b.key.bias,
          b.value.weight,  b.value.bias,     b.output.weight,    b.output.bias,
          b.ff_in.weight,  b.ff_in.bias,     b.ff_out.weight,    b.ff_out.bias,
          b.norm_attn.gamma, b.norm_attn.beta, b.norm_ff.gamma, b.norm_ff.beta};
}

}  // namespace

std::vector<GradcheckCase> RunGradchecks(std::uint64_t seed, double h, double tolerance) {
  std::vector<GradcheckCase> out;
  std::uint64_t counter = 0;
  auto next_seed = [&] { return DeriveSeed(seed, StreamKind::kGradcheck, counter++); };
  auto run = [&](const std::string& name, const LossFn& loss, const std::vector<Tensor>& in) {
    GradcheckCase c;
    c.name = name;
    c.max_error = MaxGradientError(loss, in, h, &c.elements);
    c.passed = std::isfinite(c.max_error) && c.max_error <= tolerance;
    out.push_back(c);
  };

  Rng rng(next_seed());
  const Tensor a = Random(rng, {3, 4});
  const Tensor b = Random(rng, {3, 4});
  const Tensor m = Random(rng, {4, 5});
  const Tensor bias = Random(rng, {4});
  const Tensor t3 = Random(rng, {2, 3, 4});
  const Tensor gamma = Random(rng, {4}, 0.3, 1.0);
  const Tensor beta = Random(rng, {4}, 0.3);
  using V = std::vector<Tensor>;

  run("add", Project([](const V& x) { return Add(x[0], x[1]); }, {3, 4}, next_seed()), {a, b});
  run("sub", Project([](const V& x) { return Sub(x[0], x[1]); }, {3, 4}, next_seed()), {a, b});
  run("mul", Project([](const V& x) { return Mul(x[0], x[1]); }, {3, 4}, next_seed()), {a, b});
  run("scale", Project([](const V& x) { return Scale(x[0], -1.7); }, {3, 4}, next_seed()), {a});
  run("add_bias", Project([](const V& x) { return AddBias(x[0], x[1]); }, {2, 3, 4}, next_seed()),
      {t3, bias});
  run("gelu", Project([](const V& x) { return Gelu(x[0]); }, {3, 4}, next_seed()), {a});
  run("matmul", Project([](const V& x) { return Matmul(x[0], x[1]); }, {3, 5}, next_seed()),
      {a, m});
  run("transpose", Project([](const V& x) { return Transpose(x[0]); }, {4, 3}, next_seed()), {a});
  run("reshape", Project([](const V& x) { return Reshape(x[0], {2, 6}); }, {2, 6}, next_seed()),
      {a});
  run("concat_rows",
      Project([](const V& x) { return ConcatRows({x[0], x[1]}); }, {6, 4}, next_seed()), {a, b});
  run("concat_cols",
      Project([](const V& x) { return ConcatCols({x[0], x[1]}); }, {3, 8}, next_seed()), {a, b});
  run("slice_rows", Project([](const V& x) { return SliceRows(x[0], 1, 3); }, {2, 4}, next_seed()),
      {a});
  run("slice_cols", Project([](const V& x) { return SliceCols(x[0], 1, 4); }, {3, 3}, next_seed()),
      {a});
  run("gather_rows",
      Project(
          [](const V& x) {
            const std::size_t idx[] = {2, 0, 2, 1};
            return GatherRows(x[0], idx);
          },
          {4, 4}, next_seed()),
      {a});
  run("sum", [](const V& x) { return Sum(Mul(x[0], x[0])); }, {a});
  run("mean", [](const V& x) { return Mean(Mul(x[0], x[1])); }, {a, b});
  run("mean_rows", Project([](const V& x) { return MeanRows(x[0]); }, {1, 4}, next_seed()), {a});
  run("softmax", Project([](const V& x) { return SoftmaxLastDim(x[0]); }, {3, 4}, next_seed()),
      {a});
  run("layer_norm",
      Project([](const V& x) { return LayerNorm(x[0], x[1], x[2], 1e-6); }, {2, 3, 4},
              next_seed()),
      {t3, gamma, beta});

  {
    const BlockParams block = RandomBlock(rng, 8, 2);
    const Tensor x = Random(rng, {3, 8});
    V in = BlockLeaves(block);
    in.insert(in.begin(), x);
    run("attention",
        Project([block](const V& v) { return MultiHeadAttention(v[0], block); }, {3, 8},
                next_seed()),
        in);
    run("transformer_block",
        Project([block](const V& v) { return TransformerBlock(v[0], block, 1e-6); }, {3, 8},
                next_seed()),
        in);
  }

  {
    const AuLabelMatrix labels(3, 2, {1, 0, 0, 1, 1, 1});
    const AuWeights weights = ComputeAuWeights(labels);
    const Tensor logits = Random(rng, {3, 2});
    run("weighted_bce",
        [labels, weights](const V& v) { return WeightedBce(v[0], labels, weights); }, {logits});
  }

  {
    MaskPlan mask;
    mask.visible = {0, 2};
    mask.masked = {1, 3};
    const Tensor pr = Random(rng, {4, 6});
    const Tensor pd = Random(rng, {4, 2});
    Tensor tr = Positive(rng, {4, 6});
    Tensor td = Positive(rng, {4, 2});
    run("recon_loss",
        [mask, tr, td](const V& v) { return ReconstructionLoss(v[0], v[1], tr, td, mask).total; },
        {pr, pd});
  }

  const ModelConfig tiny = TinyConfig();
  const ImagePair pair{Positive(rng, {4, 8, 3}), Positive(rng, {4, 8, 1})};
  {
    Model model(tiny, next_seed());
    Perturb(model.params(), rng);
    const MixPlan mix = SampleMixPlan(2, next_seed());
    MaskPlan mask;
    mask.visible = {1};
    mask.masked = {0};
    run("pretrain_loss",
        [&model, pair, mix, mask](const V&) { return PretrainSampleLoss(model, pair, mix, mask).total; },
        Leaves(model.params()));
  }
  {
    Model model(tiny, next_seed());
    Perturb(model.params(), rng);
    const MixPlan mix = SampleMixPlan(2, next_seed());
    const AuLabelMatrix labels(1, 2, {1, 0});
    const AuWeights weights{{1.0, 2.5}, false};
    const Tensor image = Fuse(pair);
    std::vector<Tensor> in;
    for (auto& [name, t] : model.params().Named()) {
      if (name.rfind("patch_embed", 0) == 0 || name.rfind("encoder.", 0) == 0 ||
          name.rfind("au_head", 0) == 0)
        in.push_back(t);
    }
    run("finetune_loss",
        [&model, image, mix, labels, weights](const V&) {
          return WeightedBce(model.AuLogits(image, Modality::kFusion, &mix), labels, weights);
        },
        in);
  }
  return out;
}

}  // namespace mcm

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
#include "mcm/checkpoint.hpp"

#include <map>

#include "mcm/binio.hpp"
#include "mcm/data_io.hpp"
#include "mcm/error.hpp"

namespace mcm {

namespace {

constexpr std::uint8_t kDtypeF32 = 1;

NamedArray ToArray(const std::string& name, const Shape& shape, std::span<const double> values) {
  NamedArray a{name, shape, {}};
  a.values.reserve(values.size());
  for (double v : values) a.values.push_back(static_cast<float>(v));
  return a;
}

bool IsOptimizerTensor(const std::string& name) { return name.rfind("opt.", 0) == 0; }

}  // namespace

const NamedArray* Checkpoint::Find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

RunConfig Checkpoint::Config() const {
  RunConfig c;
  try {
    c.Merge(config_text);
  } catch (const Error& e) {
    Fail(ErrorKind::kFormat, std::string("checkpoint config echo is invalid: ") + e.what());
  }
  return c;
}

std::vector<std::uint8_t> EncodeCheckpoint(const Checkpoint& checkpoint) {
  ByteWriter w;
  w.Bytes("MCM1");
  w.U32(checkpoint.version);
  w.String(checkpoint.config_text);
  w.U8(checkpoint.has_optimizer ? 1 : 0);
  if (checkpoint.has_optimizer) w.U64(checkpoint.optimizer_step);
  w.U32(static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& t : checkpoint.tensors) {
    Require(ShapeNumel(t.shape) == t.values.size(), ErrorKind::kContract,
            "checkpoint: tensor '" + t.name + "' payload does not match its shape");
    w.String(t.name);
    w.U8(kDtypeF32);
    w.U32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.U32(static_cast<std::uint32_t>(d));
    for (float v : t.values) w.F32(v);
  }
  return w.Take();
}

Checkpoint DecodeCheckpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Checkpoint c;
  Require(r.Bytes(4, "magic") == "MCM1", ErrorKind::kFormat, "checkpoint: bad magic (expected MCM1)");
  c.version = r.U32("version");
  Require(c.version == kCheckpointVersion, ErrorKind::kFormat,
          "checkpoint: unsupported format version " + std::to_string(c.version));
  c.config_text = r.String("config echo");
  const std::uint8_t has_opt = r.U8("optimizer flag");
  Require(has_opt <= 1, ErrorKind::kFormat, "checkpoint: bad optimizer flag");
  c.has_optimizer = has_opt == 1;
  if (c.has_optimizer) c.optimizer_step = r.U64("optimizer step");
  const std::uint32_t count = r.U32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.String("tensor name");
    Require(r.U8("dtype") == kDtypeF32, ErrorKind::kFormat,
            "checkpoint: tensor '" + a.name + "' has unsupported dtype");
    const std::uint32_t ndim = r.U32("ndim");
    Require(ndim >= 1 && ndim <= 8, ErrorKind::kFormat,
            "checkpoint: tensor '" + a.name + "' has bad rank");
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const std::uint32_t dim = r.U32("dims");
      Require(dim >= 1, ErrorKind::kFormat, "checkpoint: zero dimension in '" + a.name + "'");
      a.shape.push_back(dim);
      numel *= dim;
    }
    Require(numel * 4 <= r.remaining(), ErrorKind::kFormat,
            "checkpoint: truncated payload for tensor '" + a.name + "'");
    a.values.resize(numel);
    for (auto& v : a.values) v = r.F32("payload");
    c.tensors.push_back(std::move(a));
  }
  Require(r.remaining() == 0, ErrorKind::kFormat, "checkpoint: trailing bytes after tensor table");
  return c;
}

void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint) {
  WriteFileBytes(path, EncodeCheckpoint(checkpoint));
}

Checkpoint LoadCheckpoint(const std::string& path) {
  const auto bytes = ReadFileBytes(path);
  try {
    return DecodeCheckpoint(bytes);
  } catch (const Error& e) {
    Fail(e.kind(), path + ": " + e.what());
  }
}

Checkpoint MakeCheckpoint(const ModelParams& params, const RunConfig& config,
                          const OptState* state, std::span<const ParamSlot> slots) {
  Checkpoint c;
  c.config_text = config.Serialize();
  for (const auto& [name, t] : params.Named()) c.tensors.push_back(ToArray(name, t.shape(), t.data()));
  if (state) {
    c.has_optimizer = true;
    c.optimizer_step = state->step;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      c.tensors.push_back(ToArray("opt.m/" + slots[i].name, slots[i].param.shape(), state->m[i]));
      c.tensors.push_back(ToArray("opt.v/" + slots[i].name, slots[i].param.shape(), state->v[i]));
    }
  }
  return c;
}

void RestoreParams(const Checkpoint& checkpoint, ModelParams& params,
                   const std::function<bool(const std::string&)>& select) {
  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : params.Named()) by_name.emplace(name, t);
  for (const auto& a : checkpoint.tensors) {
    if (IsOptimizerTensor(a.name)) continue;
    Require(by_name.count(a.name) != 0, ErrorKind::kFormat,
            "checkpoint: unknown tensor '" + a.name + "' for this model config");
  }
  for (auto& [name, t] : by_name) {
    if (select && !select(name)) continue;
    const NamedArray* a = checkpoint.Find(name);
    Require(a != nullptr, ErrorKind::kFormat, "checkpoint: missing tensor '" + name + "'");
    Require(a->shape == t.shape(), ErrorKind::kFormat,
            "checkpoint: tensor '" + name + "' has shape " + ShapeToString(a->shape) +
                ", model expects " + ShapeToString(t.shape()));
    auto dst = t.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<double>(a->values[i]);
  }
}

Model LoadModel(const Checkpoint& checkpoint) {
  const RunConfig config = checkpoint.Config();
  ModelParams params = InitModelParams(config.model, config.seed);
  RestoreParams(checkpoint, params);
  return Model(config.model, std::move(params));
}

}  // namespace mcm

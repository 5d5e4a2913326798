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
#include "mcm/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mcm/error.hpp"
#include "mcm/log.hpp"
#include "mcm/vit.hpp"

namespace mcm {

namespace {

std::string_view Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void BadValue(std::string_view key, std::string_view value, const char* expected) {
  Fail(ErrorKind::kConfig, std::string(key) + ": expected " + expected + ", got '" +
                               std::string(value) + "'");
}

template <typename T>
T ParseInt(std::string_view key, std::string_view value) {
  T out{};
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    BadValue(key, value, "a non-negative integer");
  return out;
}

double ParseDouble(std::string_view key, std::string_view value) {
  double out = 0.0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    BadValue(key, value, "a number");
  return out;
}

bool ParseBool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  BadValue(key, value, "true or false");
}

struct Field {
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field SizeField(T RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) {
            c.*member = ParseInt<T>(k, v);
          },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field ModelSize(std::size_t ModelConfig::*member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) {
            c.model.*member = ParseInt<std::size_t>(k, v);
          },
          [member](const RunConfig& c) { return std::to_string(c.model.*member); }};
}

Field DoubleField(double RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) {
            c.*member = ParseDouble(k, v);
          },
          [member](const RunConfig& c) { return FormatDouble(c.*member); }};
}

Field BoolField(bool RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) {
            c.*member = ParseBool(k, v);
          },
          [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field StringField(std::string RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view, std::string_view v) {
            c.*member = std::string(v);
          },
          [member](const RunConfig& c) { return c.*member; }};
}

using FieldTable = std::vector<std::pair<std::string, Field>>;

const FieldTable& Fields() {
  static const FieldTable table = [] {
    FieldTable t;
    t.emplace_back("image_h", ModelSize(&ModelConfig::image_h));
    t.emplace_back("image_w", ModelSize(&ModelConfig::image_w));
    t.emplace_back("patch", ModelSize(&ModelConfig::patch));
    t.emplace_back("dim", ModelSize(&ModelConfig::dim));
    t.emplace_back("dec_dim", ModelSize(&ModelConfig::dec_dim));
    t.emplace_back("heads", ModelSize(&ModelConfig::heads));
    t.emplace_back("dec_heads", ModelSize(&ModelConfig::dec_heads));
    t.emplace_back("enc_depth", ModelSize(&ModelConfig::enc_depth));
    t.emplace_back("dec_rgb_depth", ModelSize(&ModelConfig::dec_rgb_depth));
    t.emplace_back("dec_depth_depth", ModelSize(&ModelConfig::dec_depth_depth));
    t.emplace_back("num_aus", ModelSize(&ModelConfig::num_aus));
    t.emplace_back("ln_eps", Field{[](RunConfig& c, std::string_view k, std::string_view v) {
                                     c.model.ln_eps = ParseDouble(k, v);
                                   },
                                   [](const RunConfig& c) { return FormatDouble(c.model.ln_eps); }});
    t.emplace_back("mask_ratio", DoubleField(&RunConfig::mask_ratio));
    t.emplace_back("mix_fresh_per_step", BoolField(&RunConfig::mix_fresh_per_step));
    t.emplace_back("modality", StringField(&RunConfig::modality));
    t.emplace_back("invert_weights", BoolField(&RunConfig::invert_weights));
    t.emplace_back("zero_depth", BoolField(&RunConfig::zero_depth));
    t.emplace_back("lr", DoubleField(&RunConfig::lr));
    t.emplace_back("min_lr", DoubleField(&RunConfig::min_lr));
    t.emplace_back("weight_decay", DoubleField(&RunConfig::weight_decay));
    t.emplace_back("beta1", DoubleField(&RunConfig::beta1));
    t.emplace_back("beta2", DoubleField(&RunConfig::beta2));
    t.emplace_back("adam_eps", DoubleField(&RunConfig::adam_eps));
    t.emplace_back("warmup_epochs", SizeField(&RunConfig::warmup_epochs));
    t.emplace_back("epochs", SizeField(&RunConfig::epochs));
    t.emplace_back("batch_size", SizeField(&RunConfig::batch_size));
    t.emplace_back("layer_decay", DoubleField(&RunConfig::layer_decay));
    t.emplace_back("lr_step_down_epoch", SizeField(&RunConfig::lr_step_down_epoch));
    t.emplace_back("lr_step_down_factor", DoubleField(&RunConfig::lr_step_down_factor));
    t.emplace_back("seed", SizeField(&RunConfig::seed));
    t.emplace_back("save_every", SizeField(&RunConfig::save_every));
    t.emplace_back("train_manifest", StringField(&RunConfig::train_manifest));
    t.emplace_back("val_manifest", StringField(&RunConfig::val_manifest));
    t.emplace_back("out_dir", StringField(&RunConfig::out_dir));
    return t;
  }();
  return table;
}

const Field* FindField(std::string_view key) {
  for (const auto& [name, field] : Fields())
    if (name == key) return &field;
  return nullptr;
}

}  // namespace

RunConfig RunConfig::PretrainDefaults() { return RunConfig{}; }

RunConfig RunConfig::FinetuneDefaults() {
  RunConfig c;
  c.lr = 4e-4;
  c.beta2 = 0.99;
  c.epochs = 5;
  c.warmup_epochs = 1;
  c.layer_decay = 0.75;
  c.lr_step_down_epoch = 1;
  return c;
}

const std::vector<std::string>& RunConfig::Keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, field] : Fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void RunConfig::Set(std::string_view key, std::string_view value) {
  key = Trim(key);
  value = Trim(value);
  if (key == "config_version") {
    if (ParseInt<int>(key, value) != kConfigVersion)
      Fail(ErrorKind::kConfig, "config_version: unsupported version '" + std::string(value) + "'");
    return;
  }
  const Field* f = FindField(key);
  if (!f) Fail(ErrorKind::kConfig, std::string(key) + ": unknown config key");
  f->set(*this, key, value);
}

std::string RunConfig::Get(std::string_view key) const {
  if (key == "config_version") return std::to_string(kConfigVersion);
  const Field* f = FindField(key);
  if (!f) Fail(ErrorKind::kConfig, std::string(key) + ": unknown config key");
  return f->get(*this);
}

void RunConfig::Merge(std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      Fail(ErrorKind::kConfig, "config line " + std::to_string(line_no) +
                                   ": expected 'key = value', got '" + std::string(line) + "'");
    }
    Set(line.substr(0, eq), line.substr(eq + 1));
  }
}

void RunConfig::MergeFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kConfig, "config file '" + path + "' cannot be opened");
  std::stringstream ss;
  ss << in.rdbuf();
  Merge(ss.str());
}

std::string RunConfig::Serialize() const {
  std::string out = "config_version = " + std::to_string(kConfigVersion) + "\n";
  for (const auto& [name, field] : Fields()) out += name + " = " + field.get(*this) + "\n";
  return out;
}

void RunConfig::Validate() const {
  model.Validate();
  Require(mask_ratio >= 0.0 && mask_ratio < 1.0, ErrorKind::kConfig,
          "mask_ratio must lie in [0, 1)");
  Require(MaskCount(model.num_patches(), mask_ratio) < model.num_patches(), ErrorKind::kConfig,
          "mask_ratio leaves no visible patch");
  ParseModality(modality);
  Require(layer_decay > 0.0 && layer_decay <= 1.0, ErrorKind::kConfig,
          "layer_decay must lie in (0, 1]");
  Require(batch_size >= 1, ErrorKind::kConfig, "batch_size must be at least 1");
  Require(beta1 >= 0.0 && beta1 < 1.0, ErrorKind::kConfig, "beta1 must lie in [0, 1)");
  Require(beta2 >= 0.0 && beta2 < 1.0, ErrorKind::kConfig, "beta2 must lie in [0, 1)");
  Require(adam_eps > 0.0, ErrorKind::kConfig, "adam_eps must be positive");
  Require(weight_decay >= 0.0, ErrorKind::kConfig, "weight_decay must be non-negative");
  Require(!out_dir.empty(), ErrorKind::kConfig, "out_dir must not be empty");
  MakeSchedule(1).Validate();
}

Schedule RunConfig::MakeSchedule(std::size_t steps_per_epoch) const {
  Schedule s;
  s.base_lr = lr;
  s.min_lr = min_lr;
  s.warmup_epochs = warmup_epochs;
  s.total_epochs = epochs;
  s.steps_per_epoch = steps_per_epoch;
  s.step_down_epoch = lr_step_down_epoch;
  s.step_down_factor = lr_step_down_factor;
  return s;
}

AdamWHyper RunConfig::MakeHyper() const {
  return AdamWHyper{weight_decay, beta1, beta2, adam_eps};
}

std::vector<std::string> DiffModelConfig(const ModelConfig& a, const ModelConfig& b,
                                         const std::vector<std::string>& skip) {
  RunConfig ca, cb;
  ca.model = a;
  cb.model = b;
  static const std::vector<std::string> model_keys = {
      "image_h", "image_w", "patch", "dim", "dec_dim", "heads", "dec_heads",
      "enc_depth", "dec_rgb_depth", "dec_depth_depth", "num_aus", "ln_eps"};
  std::vector<std::string> out;
  for (const auto& k : model_keys) {
    if (std::find(skip.begin(), skip.end(), k) != skip.end()) continue;
    const std::string va = ca.Get(k), vb = cb.Get(k);
    if (va != vb) out.push_back(k + ": a=" + va + " b=" + vb);
  }
  return out;
}

}  // namespace mcm

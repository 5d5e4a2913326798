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
#include "mcm/mcm.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "mcm/checkpoint.hpp"
#include "mcm/config.hpp"
#include "mcm/data_io.hpp"
#include "mcm/error.hpp"
#include "mcm/gradcheck.hpp"
#include "mcm/log.hpp"
#include "mcm/pipeline.hpp"

struct mcm_config {
  mcm::RunConfig value;
};

struct mcm_model {
  mcm::Model value;
};

struct mcm_f1_report {
  mcm::F1Report value;
};

struct mcm_gradcheck_report {
  std::vector<mcm::GradcheckCase> cases;
};

namespace {

thread_local std::string g_last_error;

mcm_status StatusFor(mcm::ErrorKind kind) {
  switch (kind) {
    case mcm::ErrorKind::kDimension: return MCM_ERR_DIMENSION;
    case mcm::ErrorKind::kContract: return MCM_ERR_CONTRACT;
    case mcm::ErrorKind::kState: return MCM_ERR_STATE;
    case mcm::ErrorKind::kNumeric: return MCM_ERR_NUMERIC;
    case mcm::ErrorKind::kParse: return MCM_ERR_PARSE;
    case mcm::ErrorKind::kData: return MCM_ERR_DATA;
    case mcm::ErrorKind::kIo: return MCM_ERR_IO;
    case mcm::ErrorKind::kFormat: return MCM_ERR_FORMAT;
    case mcm::ErrorKind::kConfig: return MCM_ERR_CONFIG;
  }
  return MCM_ERR_INTERNAL;
}

mcm_status Usage(const std::string& msg) {
  g_last_error = msg;
  return MCM_ERR_USAGE;
}

template <typename F>
mcm_status Guard(F&& body) {
  try {
    body();
    g_last_error.clear();
    return MCM_OK;
  } catch (const mcm::Error& e) {
    g_last_error = e.what();
    return StatusFor(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MCM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MCM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return MCM_ERR_INTERNAL;
  }
}

mcm_status CopyOut(const std::string& text, char* buf, std::size_t size, std::size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (!buf) return size == 0 ? MCM_OK : Usage("output buffer is NULL");
  if (size < text.size() + 1) return Usage("output buffer too small");
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return MCM_OK;
}

#define MCM_REQUIRE_ARG(cond, name) \
  if (!(cond)) return Usage(std::string("argument '") + (name) + "' is NULL")

}  // namespace

extern "C" {

const char* mcm_version(void) { return "1.0.0"; }

const char* mcm_status_string(mcm_status status) {
  switch (status) {
    case MCM_OK: return "ok";
    case MCM_ERR_USAGE: return "usage error";
    case MCM_ERR_CONFIG: return "config error";
    case MCM_ERR_IO: return "i/o error";
    case MCM_ERR_FORMAT: return "format error";
    case MCM_ERR_PARSE: return "parse error";
    case MCM_ERR_DATA: return "data error";
    case MCM_ERR_NUMERIC: return "numeric error";
    case MCM_ERR_STATE: return "state error";
    case MCM_ERR_DIMENSION: return "dimension error";
    case MCM_ERR_CONTRACT: return "contract error";
    case MCM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* mcm_last_error(void) { return g_last_error.c_str(); }

void mcm_set_log_callback(mcm_log_fn fn, void* user) {
  if (!fn) {
    mcm::SetLogSink(nullptr);
    return;
  }
  mcm::SetLogSink([fn, user](mcm::LogLevel level, const std::string& msg) {
    fn(level == mcm::LogLevel::kWarning ? MCM_LOG_WARNING : MCM_LOG_INFO, msg.c_str(), user);
  });
}

mcm_status mcm_config_create(const char* kind, mcm_config** out) {
  MCM_REQUIRE_ARG(out, "out");
  *out = nullptr;
  const std::string k = kind ? kind : "pretrain";
  if (k != "pretrain" && k != "finetune") return Usage("unknown config kind '" + k + "'");
  return Guard([&] {
    *out = new mcm_config{k == "finetune" ? mcm::RunConfig::FinetuneDefaults()
                                          : mcm::RunConfig::PretrainDefaults()};
  });
}

void mcm_config_destroy(mcm_config* config) { delete config; }

mcm_status mcm_config_merge_file(mcm_config* config, const char* path) {
  MCM_REQUIRE_ARG(config, "config");
  MCM_REQUIRE_ARG(path, "path");
  return Guard([&] { config->value.MergeFile(path); });
}

mcm_status mcm_config_merge_text(mcm_config* config, const char* text) {
  MCM_REQUIRE_ARG(config, "config");
  MCM_REQUIRE_ARG(text, "text");
  return Guard([&] { config->value.Merge(text); });
}

mcm_status mcm_config_set(mcm_config* config, const char* key, const char* value) {
  MCM_REQUIRE_ARG(config, "config");
  MCM_REQUIRE_ARG(key, "key");
  MCM_REQUIRE_ARG(value, "value");
  return Guard([&] { config->value.Set(key, value); });
}

mcm_status mcm_config_get(const mcm_config* config, const char* key, char* buf, size_t size,
                          size_t* needed) {
  MCM_REQUIRE_ARG(config, "config");
  MCM_REQUIRE_ARG(key, "key");
  std::string text;
  const mcm_status st = Guard([&] { text = config->value.Get(key); });
  return st == MCM_OK ? CopyOut(text, buf, size, needed) : st;
}

mcm_status mcm_config_serialize(const mcm_config* config, char* buf, size_t size,
                                size_t* needed) {
  MCM_REQUIRE_ARG(config, "config");
  return CopyOut(config->value.Serialize(), buf, size, needed);
}

mcm_status mcm_config_validate(const mcm_config* config) {
  MCM_REQUIRE_ARG(config, "config");
  return Guard([&] { config->value.Validate(); });
}

mcm_status mcm_synth(size_t n, size_t height, size_t width, size_t num_aus, uint64_t seed,
                     const char* out_dir) {
  MCM_REQUIRE_ARG(out_dir, "out_dir");
  return Guard([&] { mcm::SynthDataset(n, height, width, num_aus, seed, out_dir); });
}

mcm_status mcm_pretrain(const mcm_config* config) {
  MCM_REQUIRE_ARG(config, "config");
  return Guard([&] { mcm::RunPretrain(config->value); });
}

mcm_status mcm_finetune(const mcm_config* config, const char* init_checkpoint) {
  MCM_REQUIRE_ARG(config, "config");
  MCM_REQUIRE_ARG(init_checkpoint, "init_checkpoint");
  return Guard([&] { mcm::RunFinetune(config->value, init_checkpoint); });
}

mcm_status mcm_reconstruct(const char* checkpoint, const char* rgb_path, const char* depth_path,
                           const double* ratios, size_t count, uint64_t seed,
                           const char* out_prefix) {
  MCM_REQUIRE_ARG(checkpoint, "checkpoint");
  MCM_REQUIRE_ARG(rgb_path, "rgb_path");
  MCM_REQUIRE_ARG(depth_path, "depth_path");
  MCM_REQUIRE_ARG(ratios || count == 0, "ratios");
  MCM_REQUIRE_ARG(out_prefix, "out_prefix");
  return Guard([&] {
    mcm::RunReconstruct(checkpoint, rgb_path, depth_path, std::span<const double>(ratios, count),
                        seed, out_prefix);
  });
}

mcm_status mcm_eval(const char* checkpoint, const char* manifest, const char* modality,
                    int zero_depth, mcm_f1_report** out) {
  MCM_REQUIRE_ARG(checkpoint, "checkpoint");
  MCM_REQUIRE_ARG(manifest, "manifest");
  MCM_REQUIRE_ARG(modality, "modality");
  MCM_REQUIRE_ARG(out, "out");
  *out = nullptr;
  return Guard([&] {
    *out = new mcm_f1_report{mcm::RunEval(checkpoint, manifest, modality, zero_depth != 0)};
  });
}

mcm_status mcm_model_load(const char* checkpoint, mcm_model** out) {
  MCM_REQUIRE_ARG(checkpoint, "checkpoint");
  MCM_REQUIRE_ARG(out, "out");
  *out = nullptr;
  return Guard([&] { *out = new mcm_model{mcm::LoadModel(mcm::LoadCheckpoint(checkpoint))}; });
}

void mcm_model_destroy(mcm_model* model) { delete model; }

size_t mcm_model_num_aus(const mcm_model* model) {
  return model ? model->value.config().num_aus : 0;
}

mcm_status mcm_model_au_logits(const mcm_model* model, const char* modality, const double* image,
                               size_t height, size_t width, size_t channels, double* logits) {
  MCM_REQUIRE_ARG(model, "model");
  MCM_REQUIRE_ARG(modality, "modality");
  MCM_REQUIRE_ARG(image, "image");
  MCM_REQUIRE_ARG(logits, "logits");
  return Guard([&] {
    const mcm::Modality mod = mcm::ParseModality(modality);
    const std::size_t expected =
        mod == mcm::Modality::kRgb ? 3 : mod == mcm::Modality::kDepth ? 1 : 4;
    mcm::Require(channels == expected, mcm::ErrorKind::kDimension,
                 std::string("modality '") + modality + "' takes " + std::to_string(expected) +
                     " channels, got " + std::to_string(channels));
    mcm::NoGradGuard no_grad;
    const mcm::Tensor input = mcm::Tensor::FromData(
        {height, width, channels}, std::vector<double>(image, image + height * width * channels));
    const mcm::MixPlan plan = mcm::IdentityMixPlan(model->value.config().num_patches());
    const mcm::Tensor out = model->value.AuLogits(input, mod, &plan);
    std::copy(out.data().begin(), out.data().end(), logits);
  });
}

void mcm_f1_report_destroy(mcm_f1_report* report) { delete report; }

size_t mcm_f1_report_count(const mcm_f1_report* report) {
  return report ? report->value.per_au.size() : 0;
}

const char* mcm_f1_report_name(const mcm_f1_report* report, size_t index) {
  if (!report || index >= report->value.names.size()) return "";
  return report->value.names[index].c_str();
}

double mcm_f1_report_score(const mcm_f1_report* report, size_t index) {
  if (!report || index >= report->value.per_au.size()) return 0.0;
  return report->value.per_au[index];
}

double mcm_f1_report_macro(const mcm_f1_report* report) {
  return report ? report->value.macro : 0.0;
}

mcm_status mcm_f1_report_format(const mcm_f1_report* report, const char* format,
                                const char* method, const char* modal, char* buf, size_t size,
                                size_t* needed) {
  MCM_REQUIRE_ARG(report, "report");
  MCM_REQUIRE_ARG(format, "format");
  const std::string f = format;
  const std::string m = method ? method : "MCM";
  const std::string md = modal ? modal : "";
  if (f == "table") return CopyOut(mcm::FormatF1Table(report->value, m, md), buf, size, needed);
  if (f == "csv") return CopyOut(mcm::FormatF1Csv(report->value, m, md), buf, size, needed);
  return Usage("unknown report format '" + f + "' (expected table or csv)");
}

mcm_status mcm_gradcheck(uint64_t seed, double step, double tolerance,
                         mcm_gradcheck_report** out) {
  MCM_REQUIRE_ARG(out, "out");
  *out = nullptr;
  if (!(step > 0.0) || !(tolerance > 0.0)) return Usage("step and tolerance must be positive");
  return Guard([&] { *out = new mcm_gradcheck_report{mcm::RunGradchecks(seed, step, tolerance)}; });
}

void mcm_gradcheck_report_destroy(mcm_gradcheck_report* report) { delete report; }

size_t mcm_gradcheck_report_count(const mcm_gradcheck_report* report) {
  return report ? report->cases.size() : 0;
}

const char* mcm_gradcheck_report_name(const mcm_gradcheck_report* report, size_t index) {
  if (!report || index >= report->cases.size()) return "";
  return report->cases[index].name.c_str();
}

double mcm_gradcheck_report_error(const mcm_gradcheck_report* report, size_t index) {
  if (!report || index >= report->cases.size()) return 0.0;
  return report->cases[index].max_error;
}

int mcm_gradcheck_report_passed(const mcm_gradcheck_report* report, size_t index) {
  if (!report || index >= report->cases.size()) return 0;
  return report->cases[index].passed ? 1 : 0;
}

}  // extern "C"

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
#ifndef MCM_MCM_H_
#define MCM_MCM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MCM_API __declspec(dllexport)
#else
#define MCM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mcm_status {
  MCM_OK = 0,
  MCM_ERR_USAGE = 1,
  MCM_ERR_CONFIG = 2,
  MCM_ERR_IO = 3,
  MCM_ERR_FORMAT = 4,
  MCM_ERR_PARSE = 5,
  MCM_ERR_DATA = 6,
  MCM_ERR_NUMERIC = 7,
  MCM_ERR_STATE = 8,
  MCM_ERR_DIMENSION = 9,
  MCM_ERR_CONTRACT = 10,
  MCM_ERR_INTERNAL = 11
} mcm_status;

typedef enum mcm_log_level { MCM_LOG_INFO = 0, MCM_LOG_WARNING = 1 } mcm_log_level;

typedef struct mcm_config mcm_config;
typedef struct mcm_model mcm_model;
typedef struct mcm_f1_report mcm_f1_report;
typedef struct mcm_gradcheck_report mcm_gradcheck_report;

typedef void (*mcm_log_fn)(mcm_log_level level, const char* message, void* user);

MCM_API const char* mcm_version(void);
MCM_API const char* mcm_status_string(mcm_status status);
// Message of the last failed call on this thread; "" after a success.
MCM_API const char* mcm_last_error(void);
// NULL restores logging to stderr.
MCM_API void mcm_set_log_callback(mcm_log_fn fn, void* user);

// kind: "pretrain" or "finetune" selects the default set.
MCM_API mcm_status mcm_config_create(const char* kind, mcm_config** out);
MCM_API void mcm_config_destroy(mcm_config* config);
MCM_API mcm_status mcm_config_merge_file(mcm_config* config, const char* path);
MCM_API mcm_status mcm_config_merge_text(mcm_config* config, const char* text);
MCM_API mcm_status mcm_config_set(mcm_config* config, const char* key, const char* value);
// Writes a NUL-terminated value into buf. *needed receives the full length
// including the terminator; a short buffer is a usage error.
MCM_API mcm_status mcm_config_get(const mcm_config* config, const char* key, char* buf,
                                  size_t size, size_t* needed);
MCM_API mcm_status mcm_config_serialize(const mcm_config* config, char* buf, size_t size,
                                        size_t* needed);
MCM_API mcm_status mcm_config_validate(const mcm_config* config);

MCM_API mcm_status mcm_synth(size_t n, size_t height, size_t width, size_t num_aus,
                             uint64_t seed, const char* out_dir);
MCM_API mcm_status mcm_pretrain(const mcm_config* config);
MCM_API mcm_status mcm_finetune(const mcm_config* config, const char* init_checkpoint);
// ratios: `count` mask ratios in [0, 1).
MCM_API mcm_status mcm_reconstruct(const char* checkpoint, const char* rgb_path,
                                   const char* depth_path, const double* ratios, size_t count,
                                   uint64_t seed, const char* out_prefix);
MCM_API mcm_status mcm_eval(const char* checkpoint, const char* manifest, const char* modality,
                            int zero_depth, mcm_f1_report** out);

MCM_API mcm_status mcm_model_load(const char* checkpoint, mcm_model** out);
MCM_API void mcm_model_destroy(mcm_model* model);
MCM_API size_t mcm_model_num_aus(const mcm_model* model);
// image: height x width x channels values in [0, 1], channels fastest.
// channels must be 3 for "rgb", 1 for "depth" and 4 for "fusion". Fusion
// inputs use the identity channel arrangement. Writes num_aus logits.
MCM_API mcm_status mcm_model_au_logits(const mcm_model* model, const char* modality,
                                       const double* image, size_t height, size_t width,
                                       size_t channels, double* logits);

MCM_API void mcm_f1_report_destroy(mcm_f1_report* report);
MCM_API size_t mcm_f1_report_count(const mcm_f1_report* report);
MCM_API const char* mcm_f1_report_name(const mcm_f1_report* report, size_t index);
MCM_API double mcm_f1_report_score(const mcm_f1_report* report, size_t index);
MCM_API double mcm_f1_report_macro(const mcm_f1_report* report);
// format: "table" or "csv".
MCM_API mcm_status mcm_f1_report_format(const mcm_f1_report* report, const char* format,
                                        const char* method, const char* modal, char* buf,
                                        size_t size, size_t* needed);

MCM_API mcm_status mcm_gradcheck(uint64_t seed, double step, double tolerance,
                                 mcm_gradcheck_report** out);
MCM_API void mcm_gradcheck_report_destroy(mcm_gradcheck_report* report);
MCM_API size_t mcm_gradcheck_report_count(const mcm_gradcheck_report* report);
MCM_API const char* mcm_gradcheck_report_name(const mcm_gradcheck_report* report, size_t index);
MCM_API double mcm_gradcheck_report_error(const mcm_gradcheck_report* report, size_t index);
MCM_API int mcm_gradcheck_report_passed(const mcm_gradcheck_report* report, size_t index);

#ifdef __cplusplus
}
#endif

#endif  // MCM_MCM_H_

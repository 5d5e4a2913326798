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
// Command-line front end over the mcm C API.
//
//   mcm synth --n 8 --out data
//   mcm pretrain --config pretrain.cfg --set epochs=10
//   mcm finetune --init runs/pretrain.bin --set modality=fusion
//   mcm reconstruct --checkpoint runs/pretrain.bin --rgb a.ppm --depth a.pgm --out viz/a
//   mcm eval --checkpoint runs/finetune.bin --manifest data/manifest.txt
//   mcm gradcheck
//
// Exit status: 0 on success, 2 for usage and configuration errors, 1 for
// every other failure.

#include <cstdio>
#include <functional>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mcm/mcm.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

int Report(mcm_status status, const char* what) {
  if (status == MCM_OK) return kExitOk;
  std::cerr << "mcm " << what << ": " << mcm_status_string(status) << ": " << mcm_last_error()
            << "\n";
  return status == MCM_ERR_USAGE || status == MCM_ERR_CONFIG ? kExitUsage : kExitFailure;
}

std::string ReadString(const std::function<mcm_status(char*, size_t, size_t*)>& get) {
  size_t needed = 0;
  if (get(nullptr, 0, &needed) != MCM_OK) return {};
  std::string out(needed, '\0');
  if (get(out.data(), out.size(), &needed) != MCM_OK) return {};
  out.resize(needed - 1);
  return out;
}

struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;
};

void AddConfigOptions(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.file, "Config file of 'key = value' lines")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", args.sets, "Override one key, as key=value (repeatable)");
}

// Returns kExitOk and fills *out, or an exit status.
int BuildConfig(const char* kind, const ConfigArgs& args, mcm_config** out) {
  mcm_config* config = nullptr;
  if (int rc = Report(mcm_config_create(kind, &config), "config")) return rc;
  if (!args.file.empty()) {
    if (int rc = Report(mcm_config_merge_file(config, args.file.c_str()), "config")) {
      mcm_config_destroy(config);
      return rc;
    }
  }
  for (const auto& kv : args.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "mcm config: --set expects key=value, got '" << kv << "'\n";
      mcm_config_destroy(config);
      return kExitUsage;
    }
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if (int rc = Report(mcm_config_set(config, key.c_str(), value.c_str()), "config")) {
      mcm_config_destroy(config);
      return rc;
    }
  }
  if (int rc = Report(mcm_config_validate(config), "config")) {
    mcm_config_destroy(config);
    return rc;
  }
  *out = config;
  return kExitOk;
}

std::string ConfigValue(const mcm_config* config, const char* key) {
  return ReadString([&](char* buf, size_t size, size_t* needed) {
    return mcm_config_get(config, key, buf, size, needed);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked autoencoding with channel mixing for RGB-D action unit detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mcm_version()));

  struct {
    size_t n = 8, height = 32, width = 32, num_aus = 4;
    uint64_t seed = 0;
    std::string out;
  } synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic RGB-D dataset");
  synth_cmd->add_option("--n", synth.n, "Number of samples")->capture_default_str();
  synth_cmd->add_option("--height", synth.height, "Image height")->capture_default_str();
  synth_cmd->add_option("--width", synth.width, "Image width")->capture_default_str();
  synth_cmd->add_option("--num-aus", synth.num_aus, "Number of AU labels")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();

  ConfigArgs pre_args;
  auto* pre_cmd = app.add_subcommand("pretrain", "Masked-autoencoder pretraining");
  AddConfigOptions(pre_cmd, pre_args);

  ConfigArgs ft_args;
  std::string ft_init;
  auto* ft_cmd = app.add_subcommand("finetune", "AU detection finetuning");
  AddConfigOptions(ft_cmd, ft_args);
  ft_cmd->add_option("--init", ft_init, "Pretraining checkpoint")->required();

  struct {
    std::string checkpoint, rgb, depth, out;
    std::vector<double> ratios{0.5, 0.75, 0.9};
    uint64_t seed = 0;
  } rec;
  auto* rec_cmd = app.add_subcommand("reconstruct", "Dump reconstructions at several mask ratios");
  rec_cmd->add_option("--checkpoint", rec.checkpoint, "Pretraining checkpoint")->required();
  rec_cmd->add_option("--rgb", rec.rgb, "RGB image (P6)")->required();
  rec_cmd->add_option("--depth", rec.depth, "Depth image (P5)")->required();
  rec_cmd->add_option("--ratios", rec.ratios, "Mask ratios in [0, 1)")
      ->delimiter(',')
      ->capture_default_str();
  rec_cmd->add_option("--seed", rec.seed, "Seed for mixing and masking")->capture_default_str();
  rec_cmd->add_option("--out", rec.out, "Output path prefix")->required();

  struct {
    std::string checkpoint, manifest, modality = "rgb", format = "table", method = "MCM", output;
    bool zero_depth = false;
  } ev;
  auto* ev_cmd = app.add_subcommand("eval", "Per-AU F1 on a labeled manifest");
  ev_cmd->add_option("--checkpoint", ev.checkpoint, "Finetuned checkpoint")->required();
  ev_cmd->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
  ev_cmd->add_option("--modality", ev.modality, "rgb, depth or fusion")->capture_default_str();
  ev_cmd->add_flag("--zero-depth", ev.zero_depth, "Replace depth input with zeros");
  ev_cmd->add_option("--format", ev.format, "table or csv")
      ->check(CLI::IsMember({"table", "csv"}))
      ->capture_default_str();
  ev_cmd->add_option("--method", ev.method, "Method column")->capture_default_str();
  ev_cmd->add_option("--output", ev.output, "Also write the report to this file");

  struct {
    uint64_t seed = 0;
    double step = 1e-5, tol = 1e-4;
  } gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gc_cmd->add_option("--seed", gc.seed, "Seed for inputs")->capture_default_str();
  gc_cmd->add_option("--step", gc.step, "Central difference step")->capture_default_str();
  gc_cmd->add_option("--tol", gc.tol, "Relative error tolerance")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (synth_cmd->parsed()) {
    int rc = Report(
        mcm_synth(synth.n, synth.height, synth.width, synth.num_aus, synth.seed, synth.out.c_str()),
        "synth");
    if (rc == kExitOk) std::cout << "wrote " << synth.n << " samples to " << synth.out << "\n";
    return rc;
  }

  if (pre_cmd->parsed()) {
    mcm_config* config = nullptr;
    if (int rc = BuildConfig("pretrain", pre_args, &config)) return rc;
    int rc = Report(mcm_pretrain(config), "pretrain");
    if (rc == kExitOk) std::cout << "wrote " << ConfigValue(config, "out_dir") << "/pretrain.bin\n";
    mcm_config_destroy(config);
    return rc;
  }

  if (ft_cmd->parsed()) {
    mcm_config* config = nullptr;
    if (int rc = BuildConfig("finetune", ft_args, &config)) return rc;
    int rc = Report(mcm_finetune(config, ft_init.c_str()), "finetune");
    if (rc == kExitOk) std::cout << "wrote " << ConfigValue(config, "out_dir") << "/finetune.bin\n";
    mcm_config_destroy(config);
    return rc;
  }

  if (rec_cmd->parsed()) {
    return Report(mcm_reconstruct(rec.checkpoint.c_str(), rec.rgb.c_str(), rec.depth.c_str(),
                                  rec.ratios.data(), rec.ratios.size(), rec.seed, rec.out.c_str()),
                  "reconstruct");
  }

  if (ev_cmd->parsed()) {
    mcm_f1_report* report = nullptr;
    if (int rc = Report(mcm_eval(ev.checkpoint.c_str(), ev.manifest.c_str(), ev.modality.c_str(),
                                 ev.zero_depth ? 1 : 0, &report),
                        "eval"))
      return rc;
    const std::string modal = ev.modality + (ev.zero_depth ? " (zero depth)" : "");
    const std::string text = ReadString([&](char* buf, size_t size, size_t* needed) {
      return mcm_f1_report_format(report, ev.format.c_str(), ev.method.c_str(), modal.c_str(), buf,
                                  size, needed);
    });
    mcm_f1_report_destroy(report);
    std::cout << text;
    if (!ev.output.empty()) {
      std::ofstream f(ev.output, std::ios::binary);
      f << text;
      if (!f) {
        std::cerr << "mcm eval: cannot write '" << ev.output << "'\n";
        return kExitFailure;
      }
    }
    return kExitOk;
  }

  if (gc_cmd->parsed()) {
    mcm_gradcheck_report* report = nullptr;
    if (int rc = Report(mcm_gradcheck(gc.seed, gc.step, gc.tol, &report), "gradcheck")) return rc;
    bool all = true;
    for (size_t i = 0; i < mcm_gradcheck_report_count(report); ++i) {
      const bool ok = mcm_gradcheck_report_passed(report, i) != 0;
      all = all && ok;
      std::printf("%-20s %.3e %s\n", mcm_gradcheck_report_name(report, i),
                  mcm_gradcheck_report_error(report, i), ok ? "ok" : "FAIL");
    }
    mcm_gradcheck_report_destroy(report);
    return all ? kExitOk : kExitFailure;
  }
  return kExitUsage;
}

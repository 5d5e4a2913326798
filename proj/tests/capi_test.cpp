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
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mcm/mcm.h"
#include "test_util.hpp"

namespace {

using mcm::testing::TempDir;

std::string Serialize(const mcm_config* c) {
  size_t needed = 0;
  EXPECT_EQ(mcm_config_serialize(c, nullptr, 0, &needed), MCM_OK);
  std::string s(needed, '\0');
  EXPECT_EQ(mcm_config_serialize(c, s.data(), s.size(), &needed), MCM_OK);
  s.resize(needed - 1);
  return s;
}

TEST(CApiTest, ConfigLifecycleAndErrors) {
  mcm_config* c = nullptr;
  ASSERT_EQ(mcm_config_create("finetune", &c), MCM_OK);
  EXPECT_EQ(mcm_config_set(c, "epochs", "3"), MCM_OK);
  char buf[8];
  size_t needed = 0;
  EXPECT_EQ(mcm_config_get(c, "epochs", buf, sizeof buf, &needed), MCM_OK);
  EXPECT_STREQ(buf, "3");
  EXPECT_EQ(needed, 2u);
  EXPECT_EQ(mcm_config_get(c, "train_manifest", buf, 0, &needed), MCM_ERR_USAGE);
  EXPECT_EQ(mcm_config_set(c, "bogus", "1"), MCM_ERR_CONFIG);
  EXPECT_NE(std::string(mcm_last_error()).find("bogus"), std::string::npos);
  EXPECT_EQ(mcm_config_set(c, "epochs", "4"), MCM_OK);
  EXPECT_STREQ(mcm_last_error(), "");
  EXPECT_NE(Serialize(c).find("epochs = 4"), std::string::npos);
  EXPECT_EQ(mcm_config_merge_text(c, "lr = -1\n"), MCM_OK);
  EXPECT_EQ(mcm_config_validate(c), MCM_ERR_CONFIG);
  mcm_config_destroy(c);
  EXPECT_EQ(mcm_config_create("other", &c), MCM_ERR_USAGE);
  EXPECT_EQ(mcm_config_create("pretrain", nullptr), MCM_ERR_USAGE);
}

TEST(CApiTest, StatusStrings) {
  EXPECT_STREQ(mcm_status_string(MCM_OK), "ok");
  EXPECT_STREQ(mcm_status_string(MCM_ERR_FORMAT), "format error");
  EXPECT_STRNE(mcm_version(), "");
}

struct Captured {
  std::vector<std::string> messages;
};

void Capture(mcm_log_level, const char* message, void* user) {
  static_cast<Captured*>(user)->messages.emplace_back(message);
}

TEST(CApiTest, EndToEndOnTinyData) {
  TempDir dir("capi");
  ASSERT_EQ(mcm_synth(4, 16, 16, 2, 3, (dir / "data").c_str()), MCM_OK);
  mcm_config* c = nullptr;
  ASSERT_EQ(mcm_config_create("pretrain", &c), MCM_OK);
  const std::string settings = "image_h = 16\nimage_w = 16\npatch = 8\ndim = 16\ndec_dim = 8\n"
                               "heads = 2\ndec_heads = 2\nenc_depth = 1\ndec_rgb_depth = 2\n"
                               "dec_depth_depth = 1\nnum_aus = 2\nepochs = 2\nwarmup_epochs = 1\n"
                               "batch_size = 2\n";
  ASSERT_EQ(mcm_config_merge_text(c, settings.c_str()), MCM_OK);
  ASSERT_EQ(mcm_config_set(c, "train_manifest", (dir / "data/manifest.txt").c_str()), MCM_OK);
  ASSERT_EQ(mcm_config_set(c, "out_dir", (dir / "pre").c_str()), MCM_OK);
  ASSERT_EQ(mcm_pretrain(c), MCM_OK) << mcm_last_error();
  mcm_config_destroy(c);

  ASSERT_EQ(mcm_config_create("finetune", &c), MCM_OK);
  ASSERT_EQ(mcm_config_merge_text(c, settings.c_str()), MCM_OK);
  ASSERT_EQ(mcm_config_set(c, "train_manifest", (dir / "data/manifest.txt").c_str()), MCM_OK);
  ASSERT_EQ(mcm_config_set(c, "out_dir", (dir / "ft").c_str()), MCM_OK);
  ASSERT_EQ(mcm_config_set(c, "modality", "fusion"), MCM_OK);
  Captured log;
  mcm_set_log_callback(&Capture, &log);
  ASSERT_EQ(mcm_finetune(c, (dir / "pre/pretrain.bin").c_str()), MCM_OK) << mcm_last_error();
  mcm_set_log_callback(nullptr, nullptr);
  EXPECT_FALSE(log.messages.empty());
  EXPECT_EQ(mcm_finetune(c, (dir / "missing.bin").c_str()), MCM_ERR_CONFIG);
  mcm_config_destroy(c);

  mcm_f1_report* report = nullptr;
  ASSERT_EQ(mcm_eval((dir / "ft/finetune.bin").c_str(), (dir / "data/manifest.txt").c_str(),
                     "fusion", 1, &report),
            MCM_OK);
  EXPECT_EQ(mcm_f1_report_count(report), 2u);
  EXPECT_STREQ(mcm_f1_report_name(report, 1), "AU2");
  EXPECT_GE(mcm_f1_report_macro(report), 0.0);
  size_t needed = 0;
  EXPECT_EQ(mcm_f1_report_format(report, "csv", "MCM", "fusion", nullptr, 0, &needed), MCM_OK);
  std::string csv(needed, '\0');
  EXPECT_EQ(mcm_f1_report_format(report, "csv", "MCM", "fusion", csv.data(), csv.size(), &needed),
            MCM_OK);
  EXPECT_EQ(csv.rfind("method,modal,AU1,AU2,avg\n", 0), 0u);
  EXPECT_EQ(mcm_f1_report_format(report, "xml", "MCM", "fusion", nullptr, 0, &needed),
            MCM_ERR_USAGE);
  mcm_f1_report_destroy(report);

  mcm_model* model = nullptr;
  ASSERT_EQ(mcm_model_load((dir / "ft/finetune.bin").c_str(), &model), MCM_OK);
  EXPECT_EQ(mcm_model_num_aus(model), 2u);
  std::vector<double> image(16 * 16 * 4, 0.5), logits(2);
  EXPECT_EQ(mcm_model_au_logits(model, "fusion", image.data(), 16, 16, 4, logits.data()), MCM_OK);
  EXPECT_EQ(mcm_model_au_logits(model, "rgb", image.data(), 16, 16, 4, logits.data()),
            MCM_ERR_DIMENSION);
  mcm_model_destroy(model);

  const double ratios[] = {0.5, 0.75};
  ASSERT_EQ(mcm_reconstruct((dir / "pre/pretrain.bin").c_str(), (dir / "data/rgb/s0000.ppm").c_str(),
                            (dir / "data/depth/s0000.pgm").c_str(), ratios, 2, 0,
                            (dir / "viz/s0").c_str()),
            MCM_OK);
  EXPECT_TRUE(std::filesystem::exists(dir / "viz/s0_m75_masked.ppm"));
  EXPECT_EQ(mcm_model_load((dir / "data/labels.csv").c_str(), &model), MCM_ERR_FORMAT);
}

TEST(CApiTest, NullArgumentsAreUsageErrors) {
  EXPECT_EQ(mcm_pretrain(nullptr), MCM_ERR_USAGE);
  EXPECT_EQ(mcm_synth(1, 8, 8, 1, 0, nullptr), MCM_ERR_USAGE);
  EXPECT_EQ(mcm_eval(nullptr, "m", "rgb", 0, nullptr), MCM_ERR_USAGE);
  EXPECT_EQ(mcm_gradcheck(0, 0.0, 1e-4, nullptr), MCM_ERR_USAGE);
  EXPECT_EQ(mcm_f1_report_count(nullptr), 0u);
}

}  // namespace

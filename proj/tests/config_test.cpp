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

#include <gtest/gtest.h>

#include "mcm/config.hpp"
#include "mcm/error.hpp"

namespace mcm {
namespace {

TEST(ConfigTest, SerializeParsesBackExactly) {
  RunConfig c = RunConfig::FinetuneDefaults();
  c.lr = 0.1 + 0.2;
  c.train_manifest = "data/manifest.txt";
  c.model.dim = 32;
  const std::string text = c.Serialize();
  EXPECT_EQ(text.rfind("config_version = 1\n", 0), 0u);
  RunConfig back;
  back.Merge(text);
  EXPECT_EQ(back.Serialize(), text);
  EXPECT_EQ(back.lr, c.lr);
  EXPECT_EQ(back.Get("dim"), "32");
}

TEST(ConfigTest, MergeHandlesCommentsAndWhitespace) {
  RunConfig c;
  c.Merge("# header\n\n  epochs = 12   # trailing\nmodality=fusion\r\nmix_fresh_per_step = false\n");
  EXPECT_EQ(c.epochs, 12u);
  EXPECT_EQ(c.modality, "fusion");
  EXPECT_FALSE(c.mix_fresh_per_step);
}

void ExpectConfigError(const std::string& text, const std::string& mention) {
  RunConfig c;
  try {
    c.Merge(text);
    c.Validate();
    ADD_FAILURE() << "expected a config error for: " << text;
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find(mention), std::string::npos) << e.what();
  }
}

TEST(ConfigTest, ErrorsNameTheField) {
  ExpectConfigError("learning_rate = 1\n", "learning_rate");
  ExpectConfigError("epochs = many\n", "epochs");
  ExpectConfigError("mask_ratio = 1.0\n", "mask_ratio");
  ExpectConfigError("modality = thermal\n", "modality");
  ExpectConfigError("config_version = 2\n", "config_version");
  ExpectConfigError("batch_size = 0\n", "batch_size");
  ExpectConfigError("heads = 3\n", "heads");
  ExpectConfigError("no equals sign\n", "line 1");
}

TEST(ConfigTest, PresetsDiffer) {
  const RunConfig pre = RunConfig::PretrainDefaults();
  const RunConfig ft = RunConfig::FinetuneDefaults();
  EXPECT_EQ(pre.lr_step_down_epoch, 0u);
  EXPECT_EQ(ft.lr_step_down_epoch, 1u);
  EXPECT_DOUBLE_EQ(ft.layer_decay, 0.75);
  EXPECT_DOUBLE_EQ(ft.beta2, 0.99);
  EXPECT_DOUBLE_EQ(pre.beta2, 0.95);
  EXPECT_NO_THROW(pre.Validate());
  EXPECT_NO_THROW(ft.Validate());
}

TEST(ConfigTest, KeysCoverGetAndSet) {
  RunConfig c;
  for (const auto& key : RunConfig::Keys()) {
    const std::string v = c.Get(key);
    EXPECT_NO_THROW(c.Set(key, v)) << key;
  }
  EXPECT_THROW(c.Get("nope"), Error);
}

TEST(ConfigTest, ScheduleAndHyperFollowConfig) {
  RunConfig c;
  c.lr = 2e-3;
  c.epochs = 4;
  c.warmup_epochs = 1;
  c.beta2 = 0.9;
  const Schedule s = c.MakeSchedule(3);
  EXPECT_EQ(s.total_steps(), 12u);
  EXPECT_EQ(s.warmup_steps(), 3u);
  EXPECT_DOUBLE_EQ(s.base_lr, 2e-3);
  EXPECT_DOUBLE_EQ(c.MakeHyper().beta2, 0.9);
}

}  // namespace
}  // namespace mcm

// Copyright 2026 The pgac Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "pgac/codebook.hpp"
#include "pgac/transport.hpp"

namespace pgac {

enum class CodebookFormat { kOnlineKmeans, kQueue, kSinkhorn };

struct DataConfig {
  int classes = 4;
  int clouds_per_class = 200;
  int points = 512;
  double jitter = 0.01;
  double scale_min = 0.6;
  double scale_max = 1.4;
  double val_fraction = 0.2;
  // Empty keeps segmentation labels in memory only.
  std::string cache_dir;
};

struct ModelConfig {
  int dim = 48;
  int heads = 4;
  int encoder_blocks = 4;
  int decoder_blocks = 2;
  int embed_hidden = 64;
  int ffn_mult = 4;
  double init_std = 0.02;
};

struct CodebookConfig {
  int size = 512;
  double gamma = 0.99;
  Similarity similarity = Similarity::kCosine;
  CodebookFormat format = CodebookFormat::kOnlineKmeans;
  MaintenanceMode maintenance = MaintenanceMode::kMeaningful;
  // 0 selects 6 / (x_max − x_min + 1).
  double maintenance_epsilon = 0.0;
  double count_decay = 0.5;
  int heatmap_height = 16;
  int heatmap_width = 32;
};

struct TrainConfig {
  int epochs = 30;
  int batch = 8;
  double mask_ratio = 0.8;
  double lr_max = 1e-3;
  double lr_min = 1e-6;
  int warmup_epochs = 3;
  double weight_decay = 0.04;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double tau_teacher_start = 0.07;
  double tau_teacher_end = 0.04;
  double tau_student = 0.1;
  double ema_start = 0.996;
  double ema_end = 0.9995;
  // Stop after this many steps when > 0.
  long max_steps = 0;
  bool keep_all_checkpoints = false;
  bool write_heatmaps = true;
};

struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  DataConfig data;
  PartitionConfig partition;  // k and μ of the segmentation live here too
  int groups = 32;            // L
  ModelConfig model;
  CodebookConfig codebook;
  TrainConfig train;

  static RunConfig desk();
  // Sizes used by the original experiments; needs a real compute budget.
  static RunConfig full();
  // Tiny sizes for gradient checks and smoke tests.
  static RunConfig micro();

  // Throws InvalidArgument on the first violated constraint.
  void validate() const;
  // Canonical `section.key = value` lines, one per setting, fixed order.
  std::string canonical() const;
  std::string digest() const;
};

// Parses the sectioned `key = value` format:
//
//   # comment
//   [train]
//   epochs = 30
//
// Keys outside a section are looked up as given (`run.seed` also works).
// `preset = desk|full|micro` in [run] selects the base before the other
// keys apply. Unknown keys and malformed values throw InvalidArgument.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
// Applies one `section.key` = value override.
void set_config_value(RunConfig& cfg, const std::string& key,
                      const std::string& value);

std::string to_string(Grouping g);
std::string to_string(MaintenanceMode m);
std::string to_string(Similarity s);
std::string to_string(CodebookFormat f);

}  // namespace pgac

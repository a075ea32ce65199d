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

#include "pgac/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>
#include <vector>

#include "pgac/io.hpp"

namespace pgac {

std::string to_string(Grouping g) {
  return g == Grouping::kKnn ? "knn" : "gap";
}

std::string to_string(MaintenanceMode m) {
  switch (m) {
    case MaintenanceMode::kOff: return "off";
    case MaintenanceMode::kRandom: return "random";
    case MaintenanceMode::kMeaningful: break;
  }
  return "meaningful";
}

std::string to_string(Similarity s) {
  return s == Similarity::kDot ? "dot" : "cosine";
}

std::string to_string(CodebookFormat f) {
  switch (f) {
    case CodebookFormat::kQueue: return "queue";
    case CodebookFormat::kSinkhorn: return "sinkhorn";
    case CodebookFormat::kOnlineKmeans: break;
  }
  return "online-kmeans";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw InvalidArgument("config: bad value '" + v + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidArgument("config: bad boolean '" + v + "' for " + key);
}

struct Setting {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
Setting number(const std::string& key, T RunConfig::*outer) {
  return {key, [outer](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt_double(c.*outer);
            else return std::to_string(c.*outer);
          },
          [outer, key](RunConfig& c, const std::string& v) {
            c.*outer = parse_number<T>(key, v);
          }};
}

template <typename S, typename T>
Setting number(const std::string& key, S RunConfig::*outer, T S::*inner) {
  return {key,
          [outer, inner](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt_double(c.*outer.*inner);
            else return std::to_string(c.*outer.*inner);
          },
          [outer, inner, key](RunConfig& c, const std::string& v) {
            c.*outer.*inner = parse_number<T>(key, v);
          }};
}

template <typename S>
Setting boolean(const std::string& key, S RunConfig::*outer, bool S::*inner) {
  return {key,
          [outer, inner](const RunConfig& c) {
            return std::string(c.*outer.*inner ? "true" : "false");
          },
          [outer, inner, key](RunConfig& c, const std::string& v) {
            c.*outer.*inner = parse_bool(key, v);
          }};
}

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = [] {
    std::vector<Setting> t;
    t.push_back(number("run.seed", &RunConfig::seed));
    t.push_back(number("run.threads", &RunConfig::threads));

    t.push_back(number("data.classes", &RunConfig::data, &DataConfig::classes));
    t.push_back(number("data.clouds_per_class", &RunConfig::data, &DataConfig::clouds_per_class));
    t.push_back(number("data.points", &RunConfig::data, &DataConfig::points));
    t.push_back(number("data.jitter", &RunConfig::data, &DataConfig::jitter));
    t.push_back(number("data.scale_min", &RunConfig::data, &DataConfig::scale_min));
    t.push_back(number("data.scale_max", &RunConfig::data, &DataConfig::scale_max));
    t.push_back(number("data.val_fraction", &RunConfig::data, &DataConfig::val_fraction));
    t.push_back({"data.cache_dir", [](const RunConfig& c) { return c.data.cache_dir; },
                 [](RunConfig& c, const std::string& v) { c.data.cache_dir = v; }});

    t.push_back(number("geometry.k", &RunConfig::partition, &PartitionConfig::knn_k));
    t.push_back(number("geometry.mu", &RunConfig::partition, &PartitionConfig::mu));
    t.push_back(number("geometry.min_segments", &RunConfig::partition, &PartitionConfig::min_segments));

    t.push_back(number("partition.groups", &RunConfig::groups));
    t.push_back({"partition.grouping",
                 [](const RunConfig& c) { return to_string(c.partition.grouping); },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "gap") c.partition.grouping = Grouping::kGeometryAware;
                   else if (v == "knn") c.partition.grouping = Grouping::kKnn;
                   else throw InvalidArgument("config: grouping must be gap or knn, got '" + v + "'");
                 }});
    t.push_back(number("partition.epsilon_scale", &RunConfig::partition, &PartitionConfig::epsilon_scale));
    t.push_back(number("partition.sinkhorn_iters", &RunConfig::partition, &PartitionConfig::max_iters));
    t.push_back(number("partition.sinkhorn_tol", &RunConfig::partition, &PartitionConfig::tol));
    t.push_back(number("partition.knn_patch_size", &RunConfig::partition, &PartitionConfig::knn_patch_size));

    t.push_back(number("model.dim", &RunConfig::model, &ModelConfig::dim));
    t.push_back(number("model.heads", &RunConfig::model, &ModelConfig::heads));
    t.push_back(number("model.encoder_blocks", &RunConfig::model, &ModelConfig::encoder_blocks));
    t.push_back(number("model.decoder_blocks", &RunConfig::model, &ModelConfig::decoder_blocks));
    t.push_back(number("model.embed_hidden", &RunConfig::model, &ModelConfig::embed_hidden));
    t.push_back(number("model.ffn_mult", &RunConfig::model, &ModelConfig::ffn_mult));
    t.push_back(number("model.init_std", &RunConfig::model, &ModelConfig::init_std));

    t.push_back(number("codebook.size", &RunConfig::codebook, &CodebookConfig::size));
    t.push_back(number("codebook.gamma", &RunConfig::codebook, &CodebookConfig::gamma));
    t.push_back({"codebook.similarity",
                 [](const RunConfig& c) { return to_string(c.codebook.similarity); },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "cosine") c.codebook.similarity = Similarity::kCosine;
                   else if (v == "dot") c.codebook.similarity = Similarity::kDot;
                   else throw InvalidArgument("config: similarity must be cosine or dot, got '" + v + "'");
                 }});
    t.push_back({"codebook.format",
                 [](const RunConfig& c) { return to_string(c.codebook.format); },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "online-kmeans") c.codebook.format = CodebookFormat::kOnlineKmeans;
                   else if (v == "queue") c.codebook.format = CodebookFormat::kQueue;
                   else if (v == "sinkhorn") c.codebook.format = CodebookFormat::kSinkhorn;
                   else throw InvalidArgument("config: unknown codebook format '" + v + "'");
                 }});
    t.push_back({"codebook.maintenance",
                 [](const RunConfig& c) { return to_string(c.codebook.maintenance); },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "meaningful") c.codebook.maintenance = MaintenanceMode::kMeaningful;
                   else if (v == "random") c.codebook.maintenance = MaintenanceMode::kRandom;
                   else if (v == "off") c.codebook.maintenance = MaintenanceMode::kOff;
                   else throw InvalidArgument("config: maintenance must be meaningful, random or off, got '" + v + "'");
                 }});
    t.push_back(number("codebook.maintenance_epsilon", &RunConfig::codebook, &CodebookConfig::maintenance_epsilon));
    t.push_back(number("codebook.count_decay", &RunConfig::codebook, &CodebookConfig::count_decay));
    t.push_back(number("codebook.heatmap_height", &RunConfig::codebook, &CodebookConfig::heatmap_height));
    t.push_back(number("codebook.heatmap_width", &RunConfig::codebook, &CodebookConfig::heatmap_width));

    t.push_back(number("train.epochs", &RunConfig::train, &TrainConfig::epochs));
    t.push_back(number("train.batch", &RunConfig::train, &TrainConfig::batch));
    t.push_back(number("train.mask_ratio", &RunConfig::train, &TrainConfig::mask_ratio));
    t.push_back(number("train.lr_max", &RunConfig::train, &TrainConfig::lr_max));
    t.push_back(number("train.lr_min", &RunConfig::train, &TrainConfig::lr_min));
    t.push_back(number("train.warmup_epochs", &RunConfig::train, &TrainConfig::warmup_epochs));
    t.push_back(number("train.weight_decay", &RunConfig::train, &TrainConfig::weight_decay));
    t.push_back(number("train.beta1", &RunConfig::train, &TrainConfig::beta1));
    t.push_back(number("train.beta2", &RunConfig::train, &TrainConfig::beta2));
    t.push_back(number("train.adam_eps", &RunConfig::train, &TrainConfig::adam_eps));
    t.push_back(number("train.tau_teacher_start", &RunConfig::train, &TrainConfig::tau_teacher_start));
    t.push_back(number("train.tau_teacher_end", &RunConfig::train, &TrainConfig::tau_teacher_end));
    t.push_back(number("train.tau_student", &RunConfig::train, &TrainConfig::tau_student));
    t.push_back(number("train.ema_start", &RunConfig::train, &TrainConfig::ema_start));
    t.push_back(number("train.ema_end", &RunConfig::train, &TrainConfig::ema_end));
    t.push_back(number("train.max_steps", &RunConfig::train, &TrainConfig::max_steps));
    t.push_back(boolean("train.keep_all_checkpoints", &RunConfig::train, &TrainConfig::keep_all_checkpoints));
    t.push_back(boolean("train.write_heatmaps", &RunConfig::train, &TrainConfig::write_heatmaps));
    return t;
  }();
  return table;
}

RunConfig preset(const std::string& name) {
  if (name == "desk") return RunConfig::desk();
  if (name == "full") return RunConfig::full();
  if (name == "micro") return RunConfig::micro();
  throw InvalidArgument("config: unknown preset '" + name + "'");
}

}  // namespace

RunConfig RunConfig::desk() { return RunConfig{}; }

RunConfig RunConfig::full() {
  RunConfig c;
  c.data.points = 1024;
  c.groups = 64;
  c.model.dim = 384;
  c.model.heads = 6;
  c.model.encoder_blocks = 12;
  c.model.decoder_blocks = 4;
  c.model.embed_hidden = 128;
  c.codebook.size = 8192;
  c.codebook.heatmap_height = 64;
  c.codebook.heatmap_width = 128;
  c.train.epochs = 300;
  c.train.warmup_epochs = 50;
  c.train.batch = 128;
  return c;
}

RunConfig RunConfig::micro() {
  RunConfig c;
  c.data.clouds_per_class = 8;
  c.data.points = 64;
  c.partition.knn_k = 8;
  c.groups = 4;
  c.model.dim = 8;
  c.model.heads = 4;
  c.model.encoder_blocks = 1;
  c.model.decoder_blocks = 1;
  c.model.embed_hidden = 8;
  c.codebook.size = 16;
  c.codebook.heatmap_height = 4;
  c.codebook.heatmap_width = 4;
  c.train.epochs = 1;
  c.train.batch = 4;
  c.train.warmup_epochs = 1;
  return c;
}

void RunConfig::validate() const {
  require(threads >= 1, "config: run.threads must be >= 1");
  require(data.classes >= 1 && data.classes <= 4, "config: data.classes must be in [1,4]");
  require(data.clouds_per_class >= 1, "config: data.clouds_per_class must be >= 1");
  require(data.points >= 64, "config: data.points must be >= 64");
  require(data.jitter >= 0.0, "config: data.jitter must be >= 0");
  require(data.scale_min > 0.0 && data.scale_min <= data.scale_max,
          "config: need 0 < data.scale_min <= data.scale_max");
  require(data.val_fraction > 0.0 && data.val_fraction < 1.0,
          "config: data.val_fraction must be in (0,1)");
  require(partition.knn_k >= 1 && partition.knn_k < data.points,
          "config: geometry.k must be in [1, points)");
  require(partition.mu > 0.0, "config: geometry.mu must be positive");
  require(partition.min_segments >= 1, "config: geometry.min_segments must be >= 1");
  require(groups >= 1 && groups <= data.points, "config: partition.groups must be in [1, points]");
  require(partition.epsilon_scale > 0.0, "config: partition.epsilon_scale must be positive");
  require(partition.max_iters >= 1, "config: partition.sinkhorn_iters must be >= 1");
  require(partition.tol > 0.0, "config: partition.sinkhorn_tol must be positive");
  require(partition.knn_patch_size >= 0 && partition.knn_patch_size <= data.points,
          "config: partition.knn_patch_size must be in [0, points]");
  require(model.dim >= 1 && model.heads >= 1 && model.dim % model.heads == 0,
          "config: model.heads must divide model.dim");
  require(model.encoder_blocks >= 1 && model.decoder_blocks >= 1,
          "config: model needs at least one encoder and one decoder block");
  require(model.embed_hidden >= 1 && model.ffn_mult >= 1, "config: model widths must be positive");
  require(model.init_std > 0.0, "config: model.init_std must be positive");
  require(codebook.size >= 1, "config: codebook.size must be >= 1");
  require(codebook.gamma > 0.0 && codebook.gamma < 1.0, "config: codebook.gamma must be in (0,1)");
  require(codebook.maintenance_epsilon >= 0.0, "config: codebook.maintenance_epsilon must be >= 0");
  require(codebook.count_decay > 0.0 && codebook.count_decay <= 1.0,
          "config: codebook.count_decay must be in (0,1]");
  require(codebook.heatmap_height * codebook.heatmap_width == codebook.size,
          "config: heatmap_height * heatmap_width must equal codebook.size");
  require(train.epochs >= 1 && train.batch >= 1, "config: train.epochs and train.batch must be >= 1");
  require(train.mask_ratio > 0.0 && train.mask_ratio < 1.0, "config: train.mask_ratio must be in (0,1)");
  require(static_cast<int>(groups * train.mask_ratio) >= 1,
          "config: mask ratio masks no patch at this group count");
  require(static_cast<int>(groups * train.mask_ratio) < groups,
          "config: mask ratio leaves no visible patch");
  require(train.lr_max > 0.0 && train.lr_min >= 0.0 && train.lr_min <= train.lr_max,
          "config: need 0 <= lr_min <= lr_max, lr_max > 0");
  require(train.warmup_epochs >= 0, "config: train.warmup_epochs must be >= 0");
  require(train.weight_decay >= 0.0, "config: train.weight_decay must be >= 0");
  require(train.beta1 >= 0.0 && train.beta1 < 1.0 && train.beta2 >= 0.0 && train.beta2 < 1.0,
          "config: betas must be in [0,1)");
  require(train.adam_eps > 0.0, "config: train.adam_eps must be positive");
  require(train.tau_teacher_start > 0.0 && train.tau_teacher_end > 0.0 && train.tau_student > 0.0,
          "config: temperatures must be positive");
  require(train.ema_start >= 0.0 && train.ema_start <= 1.0 && train.ema_end >= 0.0 &&
              train.ema_end <= 1.0,
          "config: EMA momenta must be in [0,1]");
  require(train.max_steps >= 0, "config: train.max_steps must be >= 0");
  const long clouds = static_cast<long>(data.classes) * data.clouds_per_class;
  const long train_clouds = clouds - static_cast<long>(clouds * data.val_fraction);
  require(train_clouds >= 1, "config: no training clouds after the validation split");
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& s : settings()) out += s.key + " = " + s.get(*this) + "\n";
  return out;
}

std::string RunConfig::digest() const {
  Fnv1a h;
  h.update(canonical());
  return h.hex();
}

void set_config_value(RunConfig& cfg, const std::string& key,
                      const std::string& value) {
  for (const auto& s : settings()) {
    if (s.key == key) {
      s.set(cfg, value);
      return;
    }
  }
  throw InvalidArgument("config: unknown key '" + key + "'");
}

RunConfig parse_config(const std::string& text) {
  struct Entry {
    std::string key, value;
    int line;
  };
  std::vector<Entry> entries;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ParseError("config: bad section header", lineno);
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config: expected key = value", lineno);
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    entries.push_back({key, value, lineno});
  }
  RunConfig cfg;
  auto apply = [&](const Entry& e, bool presets) {
    if ((e.key == "run.preset") != presets) return;
    try {
      if (presets) {
        cfg = preset(e.value);
      } else {
        set_config_value(cfg, e.key, e.value);
      }
    } catch (const InvalidArgument& err) {
      throw ParseError(err.what(), e.line);
    }
  };
  for (const auto& e : entries) apply(e, true);
  for (const auto& e : entries) apply(e, false);
  return cfg;
}

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

}  // namespace pgac

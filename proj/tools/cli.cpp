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

#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pgac/checkpoint.hpp"
#include "pgac/config.hpp"
#include "pgac/data.hpp"
#include "pgac/geometry.hpp"
#include "pgac/io.hpp"
#include "pgac/training.hpp"
#include "pgac/transport.hpp"

namespace pgac::cli {

namespace {

namespace fs = std::filesystem;

std::string version_text() {
  std::ostringstream s;
  s << "pgac " << PGAC_VERSION << " (checkpoint format " << kCheckpointVersion
    << ", feature version " << kFeatureVersion << ")";
  return s.str();
}

// Applies POINTGAC_SEED, then explicit overrides, then validates.
void finalize_config(RunConfig& cfg, const std::vector<std::string>& sets, int threads) {
  if (const char* env = std::getenv("POINTGAC_SEED"); env && *env) {
    set_config_value(cfg, "run.seed", env);
  }
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (threads > 0) cfg.threads = threads;
  cfg.validate();
}

RunConfig config_from(const std::string& path, const std::string& preset) {
  if (!path.empty()) return load_config(path);
  return parse_config("run.preset = " + preset + "\n");
}

std::string patchset_text(const PatchSet& ps) {
  std::string out = "# point patch\n";
  for (int i = 0; i < ps.num_points(); ++i) {
    out += std::to_string(i) + " " + std::to_string(ps.patch_of[i]) + "\n";
  }
  return out;
}

std::string patchset_json(const PatchSet& ps, Grouping grouping) {
  nlohmann::ordered_json j;
  j["num_points"] = ps.num_points();
  j["num_patches"] = ps.num_patches();
  j["grouping"] = to_string(grouping);
  j["overlapping"] = ps.overlapping;
  auto centers = nlohmann::json::array();
  for (Eigen::Index r = 0; r < ps.centers.rows(); ++r) {
    centers.push_back({ps.centers(r, 0), ps.centers(r, 1), ps.centers(r, 2)});
  }
  j["centers"] = centers;
  j["center_indices"] = ps.center_indices;
  j["center_labels"] = ps.center_labels;
  j["patches"] = ps.patch_points;
  return j.dump(1) + "\n";
}

Checkpoint load_and_check(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  RunConfig embedded = parse_config(checkpoint_config_text(ckpt));
  if (embedded.digest() != ckpt.config_digest) {
    throw ParseError("checkpoint config digest does not match its embedded config", 0);
  }
  return ckpt;
}

struct Options {
  int threads = 0;
  std::vector<std::string> sets;
  // segment / partition
  std::string in, out;
  double mu = 0.06;
  int k = 16;
  int min_segments = 1;
  int groups = 32;
  std::string grouping = "gap";
  // pretrain / probe / gradcheck / heatmap
  std::string config, preset = "desk", checkpoint, hw;
  int epochs = 0;
  double mask_ratio = 0.0;
  std::string maintenance;
  long long seed = -1;
  double tolerance = 1e-4;
};

Grouping parse_grouping(const std::string& g) {
  if (g == "gap" || g == "geometry-aware") return Grouping::kGeometryAware;
  if (g == "knn") return Grouping::kKnn;
  throw InvalidArgument("grouping must be gap or knn, got '" + g + "'");
}

int cmd_segment(const Options& o, std::ostream& out) {
  PointCloud cloud = load_cloud(o.in);
  cloud.labels = segment_cloud(cloud, o.k, o.mu, o.min_segments);
  save_cloud(o.out, cloud);
  out << "points " << cloud.size() << " segments " << cloud.num_segments() << "\n";
  return kExitOk;
}

int cmd_partition(const Options& o, std::ostream& out) {
  PointCloud cloud = load_cloud(o.in);
  PartitionConfig pc;
  pc.grouping = parse_grouping(o.grouping);
  pc.knn_k = o.k;
  pc.mu = o.mu;
  pc.min_segments = o.min_segments;
  require(o.groups >= 1 && o.groups <= cloud.size(), "partition: need 1 <= groups <= N");
  PatchSet ps = partition_pipeline(cloud, o.groups, pc);
  if (!ps.overlapping) check_partition(ps);
  write_file_atomic(o.out, patchset_text(ps));
  write_file_atomic(o.out + ".json", patchset_json(ps, pc.grouping));
  out << "points " << ps.num_points() << " patches " << ps.num_patches() << "\n";
  return kExitOk;
}

void apply_training_flags(RunConfig& cfg, const Options& o) {
  if (o.epochs > 0) cfg.train.epochs = o.epochs;
  if (o.mask_ratio > 0.0) cfg.train.mask_ratio = o.mask_ratio;
  if (!o.maintenance.empty()) set_config_value(cfg, "codebook.maintenance", o.maintenance);
  if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
}

int cmd_pretrain(const Options& o, std::ostream& out) {
  RunConfig cfg = config_from(o.config, o.preset);
  apply_training_flags(cfg, o);
  if (!o.grouping.empty()) cfg.partition.grouping = parse_grouping(o.grouping);
  finalize_config(cfg, o.sets, o.threads);

  const auto t0 = std::chrono::steady_clock::now();
  Dataset data = build_dataset(cfg);
  LabelCache cache(cfg.data.cache_dir);
  std::vector<PreparedCloud> clouds = prepare_dataset(data, cfg, &cache);
  fs::create_directories(o.out);
  write_file_atomic((fs::path(o.out) / "config.txt").string(), cfg.canonical());

  LoopOptions lo;
  lo.out_dir = o.out;
  lo.on_epoch = [&](const EpochSummary& e, const TrainState&) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "epoch %d loss %.6f dead_fraction %.4f\n", e.epoch,
                  e.mean_loss, e.dead_fraction);
    out << buf << std::flush;
  };
  LoopResult r = pretrain_loop(clouds, data.train, cfg, lo);
  const double acc = linear_probe(r.state.student, clouds, data.train, data.val, cfg.model,
                                  cfg.threads);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[160];
  std::snprintf(buf, sizeof(buf), "steps %ld probe_accuracy %.4f seconds %.1f\n", r.state.step,
                acc, secs);
  out << buf;
  return kExitOk;
}

int cmd_probe(const Options& o, std::ostream& out) {
  Checkpoint ckpt = load_and_check(o.checkpoint);
  RunConfig cfg = o.config.empty() ? parse_config(checkpoint_config_text(ckpt))
                                   : load_config(o.config);
  finalize_config(cfg, o.sets, o.threads);
  TrainState state = unpack_state(ckpt);
  Dataset data = build_dataset(cfg);
  LabelCache cache(cfg.data.cache_dir);
  std::vector<PreparedCloud> clouds = prepare_dataset(data, cfg, &cache);
  const double acc =
      linear_probe(state.student, clouds, data.train, data.val, cfg.model, cfg.threads);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "accuracy %.4f\n", acc);
  out << buf;
  return kExitOk;
}

int cmd_heatmap(const Options& o, std::ostream& out) {
  int h = 0, w = 0;
  char tail = 0;
  if (std::sscanf(o.hw.c_str(), "%dx%d%c", &h, &w, &tail) != 2 || h <= 0 || w <= 0) {
    throw InvalidArgument("--hw expects HxW, got '" + o.hw + "'");
  }
  TrainState state = unpack_state(load_and_check(o.checkpoint));
  const std::string csv = utilization_export(state.codebook, h, w, o.out);
  out << "wrote " << o.out << " and " << csv << "\n";
  return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  RunConfig cfg = config_from(o.config, o.preset);
  finalize_config(cfg, o.sets, o.threads);
  RunConfig small = cfg;
  small.data.clouds_per_class = std::min(cfg.data.clouds_per_class, 2);
  Dataset data = build_dataset(small);
  std::vector<PreparedCloud> clouds = prepare_dataset(data, small);
  std::vector<const PreparedCloud*> batch;
  for (int i = 0; i < std::min<int>(2, static_cast<int>(clouds.size())); ++i) {
    batch.push_back(&clouds[i]);
  }
  TrainState state = init_train_state(cfg, clouds);
  GradCheckOptions go;
  go.tolerance = o.tolerance;
  GradCheckReport report = pipeline_grad_check(state, batch, cfg, go);
  out << report.to_string();
  return report.passed ? kExitOk : kExitFault;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geometry-aware partitioning and codebook-guided masked point cloud pretraining"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--threads", o.threads, "Worker threads (1 keeps runs bit-reproducible)")
      ->check(CLI::PositiveNumber);
  app.set_version_flag("--version", version_text());
  auto add_sets = [&](CLI::App* c) {
    c->add_option("--set", o.sets, "Override a config entry, key=value (repeatable)");
  };

  auto* seg = app.add_subcommand("segment", "Segment a cloud into geometric regions");
  seg->add_option("in", o.in, "Input cloud")->required()->check(CLI::ExistingFile);
  seg->add_option("out", o.out, "Output cloud with label column")->required();
  seg->add_option("--mu", o.mu, "Regularization strength")->check(CLI::PositiveNumber);
  seg->add_option("--k", o.k, "Neighbors per point")->check(CLI::PositiveNumber);
  seg->add_option("--min-segments", o.min_segments, "Stop merging at this many segments");

  auto* part = app.add_subcommand("partition", "Split a cloud into label-pure patches");
  part->add_option("in", o.in, "Input cloud (labels are used when present)")
      ->required()
      ->check(CLI::ExistingFile);
  part->add_option("out", o.out, "Output point-to-patch table; a .json sidecar is added")
      ->required();
  part->add_option("--groups", o.groups, "Number of patches L");
  part->add_option("--grouping", o.grouping, "gap or knn");
  part->add_option("--mu", o.mu, "Segmentation regularization strength");
  part->add_option("--k", o.k, "Neighbors per point for segmentation");
  part->add_option("--min-segments", o.min_segments, "Stop merging at this many segments");

  std::string pretrain_grouping, gradcheck_preset = "micro";
  auto* pre = app.add_subcommand("pretrain", "Run teacher-student pretraining");
  pre->add_option("--config", o.config, "Config file (key = value with sections)")
      ->check(CLI::ExistingFile);
  pre->add_option("--preset", o.preset, "desk, full or micro when no config is given");
  pre->add_option("--out", o.out, "Output directory")->required();
  pre->add_option("--epochs", o.epochs, "Override train.epochs");
  pre->add_option("--mask-ratio", o.mask_ratio, "Override train.mask_ratio");
  pre->add_option("--grouping", pretrain_grouping, "gap or knn");
  pre->add_option("--maintenance", o.maintenance, "meaningful, random or off");
  pre->add_option("--seed", o.seed, "Override run.seed");
  add_sets(pre);

  auto* probe = app.add_subcommand("probe", "Nearest-centroid probe on frozen encoder features");
  probe->add_option("--checkpoint", o.checkpoint, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  probe->add_option("--config", o.config, "Config (defaults to the one in the checkpoint)");
  add_sets(probe);

  auto* heat = app.add_subcommand("heatmap", "Export codebook utilization as PGM and CSV");
  heat->add_option("--checkpoint", o.checkpoint, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  heat->add_option("--hw", o.hw, "Image size HxW with H*W = K")->required();
  heat->add_option("--out", o.out, "Output .pgm path")->required();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the student loss");
  grad->add_option("--config", o.config, "Config file (defaults to the micro preset)");
  grad->add_option("--preset", gradcheck_preset, "Preset when no config is given");
  grad->add_option("--tolerance", o.tolerance, "Pass threshold on block relative error");
  add_sets(grad);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*seg) return cmd_segment(o, out);
    if (*part) return cmd_partition(o, out);
    if (*pre) {
      o.grouping = pretrain_grouping;
      return cmd_pretrain(o, out);
    }
    if (*probe) return cmd_probe(o, out);
    if (*heat) return cmd_heatmap(o, out);
    if (*grad) {
      o.preset = gradcheck_preset;
      return cmd_gradcheck(o, out);
    }
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const NotImplemented& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "fault: " << e.what() << "\n";
    return kExitFault;
  }
  return kExitInvalid;
}

}  // namespace pgac::cli

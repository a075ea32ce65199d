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

#include "pgac/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "pgac/io.hpp"

namespace pgac {

namespace {

constexpr const char* kStudentPrefix = "student/";
constexpr const char* kTeacherPrefix = "teacher/";
constexpr const char* kAdamMPrefix = "optim.m/";
constexpr const char* kAdamVPrefix = "optim.v/";

Mat unit_rows(const Mat& m) {
  Vec norms = m.rowwise().norm().cwiseMax(1e-12);
  return m.array().colwise() / norms.array();
}

void add_prefixed(ParamSet& out, const std::string& prefix, const ParamSet& in) {
  for (const auto& [name, m] : in) out.set(prefix + name, m);
}

ParamSet strip_prefix(const ParamSet& in, const std::string& prefix) {
  ParamSet out;
  for (const auto& [name, m] : in) {
    if (name.rfind(prefix, 0) == 0) out.set(name.substr(prefix.size()), m);
  }
  return out;
}

std::string epoch_tag(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%03d", epoch);
  return buf;
}

}  // namespace

MaskSpec random_mask(int num_tokens, double ratio, std::mt19937_64& rng) {
  require(ratio > 0.0 && ratio < 1.0, "random_mask: ratio must be in (0,1)");
  // The small offset keeps e.g. 10·0.8 from flooring to 7 on rounding noise.
  const int masked = static_cast<int>(std::floor(num_tokens * ratio + 1e-9));
  require(masked >= 1, "random_mask: floor(L*r) must be >= 1");
  require(masked < num_tokens, "random_mask: at least one token must stay visible");

  std::vector<int> order(num_tokens);
  for (int i = 0; i < num_tokens; ++i) order[i] = i;
  for (int i = 0; i < masked; ++i) {
    std::uniform_int_distribution<int> pick(i, num_tokens - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  MaskSpec spec;
  spec.ratio = ratio;
  spec.masked.assign(order.begin(), order.begin() + masked);
  spec.visible.assign(order.begin() + masked, order.end());
  std::sort(spec.masked.begin(), spec.masked.end());
  std::sort(spec.visible.begin(), spec.visible.end());
  return spec;
}

double alignment_loss(const Mat& q_teacher, const Mat& q_student) {
  require(q_teacher.rows() == q_student.rows() && q_teacher.cols() == q_student.cols(),
          "alignment_loss: shape mismatch");
  require(q_teacher.rows() > 0, "alignment_loss: no rows");
  double total = 0.0;
  for (Eigen::Index r = 0; r < q_teacher.rows(); ++r) {
    for (Eigen::Index k = 0; k < q_teacher.cols(); ++k) {
      const double p = q_teacher(r, k);
      if (p > 0.0) total += p * (std::log(p) - std::log(q_student(r, k)));
    }
  }
  return total / static_cast<double>(q_teacher.rows());
}

ad::Var alignment_loss(const Mat& q_teacher, ad::Var log_q_student) {
  require(q_teacher.rows() == log_q_student.rows() &&
              q_teacher.cols() == log_q_student.cols(),
          "alignment_loss: shape mismatch");
  require(q_teacher.rows() > 0, "alignment_loss: no rows");
  double entropy_term = 0.0;
  for (Eigen::Index i = 0; i < q_teacher.size(); ++i) {
    const double p = q_teacher.data()[i];
    if (p > 0.0) entropy_term += p * std::log(p);
  }
  ad::Tape& tape = *log_q_student.tape();
  Mat c(1, 1);
  c(0, 0) = entropy_term;
  ad::Var cross = ad::weighted_sum(log_q_student, q_teacher);
  return ad::scale(ad::sub(tape.constant(std::move(c)), cross),
                   1.0 / static_cast<double>(q_teacher.rows()));
}

ad::Var student_logits(ad::Var features, const Mat& codes, double tau,
                       Similarity sim) {
  require(tau > 0.0, "student_logits: temperature must be positive");
  ad::Tape& tape = *features.tape();
  if (sim == Similarity::kDot) {
    return ad::scale(ad::matmul(features, tape.constant(codes.transpose())), 1.0 / tau);
  }
  ad::Var f = ad::l2_normalize_rows(features);
  return ad::scale(ad::matmul(f, tape.constant(unit_rows(codes).transpose())), 1.0 / tau);
}

AdamState init_adam(const ParamSet& params) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

void adamw_step(ParamSet& params, const ParamSet& grads, AdamState& state,
                const AdamWHyper& h) {
  ++state.t;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  for (auto& [name, p] : params) {
    const Mat& g = grads.at(name);
    require(g.rows() == p.rows() && g.cols() == p.cols(), "adamw_step: shape mismatch for " + name);
    Mat& m = state.m.at(name);
    Mat& v = state.v.at(name);
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g.cwiseProduct(g);
    const Mat update =
        (m.array() / c1) / ((v.array() / c2).sqrt() + h.eps) + h.weight_decay * p.array();
    p -= h.lr * update;
  }
}

double lr_schedule(long step, long warmup, long total, double lr_max, double lr_min) {
  require(step >= 0, "lr_schedule: step must be >= 0");
  if (step < warmup) return lr_max * static_cast<double>(step) / static_cast<double>(warmup);
  const long span = total - 1 - warmup;
  if (span <= 0) return lr_max;
  const double t = std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(span));
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

double teacher_momentum(long step, long total, double start, double end) {
  if (total <= 0) return start;
  const double t = std::clamp(static_cast<double>(step) / static_cast<double>(total), 0.0, 1.0);
  return end - 0.5 * (end - start) * (1.0 + std::cos(std::numbers::pi * t));
}

void ema_teacher_update(ParamSet& teacher, const ParamSet& student, double momentum) {
  require(momentum >= 0.0 && momentum <= 1.0, "ema_teacher_update: momentum must be in [0,1]");
  for (auto& [name, t] : teacher) {
    const Mat& s = student.at(name);
    require(s.rows() == t.rows() && s.cols() == t.cols(),
            "ema_teacher_update: shape mismatch for " + name);
    t = momentum * t + (1.0 - momentum) * s;
  }
}

TrainState init_train_state(const RunConfig& cfg, std::span<const PreparedCloud> pool) {
  cfg.validate();
  if (cfg.codebook.format != CodebookFormat::kOnlineKmeans) {
    throw NotImplemented("codebook format '" + to_string(cfg.codebook.format) +
                         "' is not implemented; use online-kmeans");
  }
  require(!pool.empty(), "init_train_state: empty feature pool");
  TrainState s;
  s.rng.seed(cfg.seed);
  s.student = init_student_params(cfg.model, s.rng);
  s.teacher = teacher_from_student(s.student);
  s.optim = init_adam(s.student);

  std::vector<Mat> feats;
  Eigen::Index rows = 0;
  for (const auto& c : pool) {
    feats.push_back(teacher_forward(c, s.teacher, cfg.model));
    rows += feats.back().rows();
  }
  Mat stacked(rows, cfg.model.dim);
  Eigen::Index r = 0;
  for (const auto& f : feats) {
    stacked.middleRows(r, f.rows()) = f;
    r += f.rows();
  }
  s.codebook = init_codebook(stacked, cfg.codebook.size, cfg.codebook.gamma, s.rng);
  return s;
}

ad::Var student_loss(ad::Tape& tape, const BoundParams& p,
                     std::span<const PreparedCloud* const> batch,
                     const StudentTargets& targets, const RunConfig& cfg) {
  require(!batch.empty(), "student_loss: empty batch");
  require(targets.masks.size() == batch.size() && targets.q_teacher.size() == batch.size(),
          "student_loss: one mask and target per cloud required");
  std::vector<ad::Var> losses;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const MaskSpec& mask = targets.masks[b];
    PatchTokens tokens = embed(tape, batch[b]->patches, batch[b]->centers, p);
    ad::Var recon = student_forward(tokens, mask.visible, mask.masked, p, cfg.model);
    ad::Var logits = student_logits(ad::gather_rows(recon, mask.masked), targets.codes,
                                    cfg.train.tau_student, cfg.codebook.similarity);
    losses.push_back(alignment_loss(targets.q_teacher[b], ad::log_softmax_rows(logits)));
  }
  ad::Var total = ad::reduce_sum(ad::concat_rows(losses));
  return ad::scale(total, 1.0 / static_cast<double>(batch.size()));
}

StepDiagnostics pretrain_step(std::span<const PreparedCloud* const> batch,
                              TrainState& state, const RunConfig& cfg,
                              const StepSchedule& schedule, Mat* teacher_features) {
  require(!batch.empty(), "pretrain_step: empty batch");
  StepDiagnostics d;
  d.step = state.step;
  d.epoch = state.epoch;

  // Teacher branch and online k-means.
  std::vector<Mat> teacher;
  Eigen::Index rows = 0;
  for (const PreparedCloud* c : batch) {
    teacher.push_back(teacher_forward(*c, state.teacher, cfg.model));
    rows += teacher.back().rows();
  }
  Mat stacked(rows, cfg.model.dim);
  {
    Eigen::Index r = 0;
    for (const auto& t : teacher) {
      stacked.middleRows(r, t.rows()) = t;
      r += t.rows();
    }
  }
  const Mat before = state.codebook.vectors;
  kmeans_update(state.codebook, stacked, nearest_code(stacked, state.codebook));
  d.codebook_drift = (state.codebook.vectors - before).norm();
  if (teacher_features) *teacher_features = stacked;

  const long horizon = std::max(schedule.total, state.step);
  d.tau_t = teacher_temperature(state.step, horizon, cfg.train.tau_teacher_start,
                                cfg.train.tau_teacher_end);
  StudentTargets targets;
  targets.codes = state.codebook.vectors;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    MaskSpec mask = random_mask(batch[b]->num_tokens(), cfg.train.mask_ratio, state.rng);
    Mat masked_rows(static_cast<Eigen::Index>(mask.masked.size()), cfg.model.dim);
    for (std::size_t i = 0; i < mask.masked.size(); ++i) {
      masked_rows.row(static_cast<Eigen::Index>(i)) = teacher[b].row(mask.masked[i]);
    }
    targets.q_teacher.push_back(
        soft_assign(masked_rows, state.codebook, d.tau_t, cfg.codebook.similarity).probs);
    targets.masks.push_back(std::move(mask));
  }

  // Student branch.
  ad::Tape tape;
  BoundParams p(tape, state.student, /*requires_grad=*/true);
  ad::Var loss = student_loss(tape, p, batch, targets, cfg);
  d.loss = loss.value()(0, 0);
  if (!std::isfinite(d.loss)) {
    throw NumericFault("non-finite loss at step " + std::to_string(state.step));
  }
  tape.backward(loss);

  d.lr = lr_schedule(state.step, std::min(schedule.warmup, horizon), horizon,
                     cfg.train.lr_max, cfg.train.lr_min);
  AdamWHyper hyper{d.lr, cfg.train.weight_decay, cfg.train.beta1, cfg.train.beta2,
                   cfg.train.adam_eps};
  adamw_step(state.student, p.gradients(), state.optim, hyper);
  ema_teacher_update(state.teacher, state.student,
                     teacher_momentum(state.step, horizon, cfg.train.ema_start,
                                      cfg.train.ema_end));
  ++state.step;
  d.dead_fraction = dead_fraction(state.codebook, 0.0, CountWindow::kWindow);
  return d;
}

std::vector<PreparedCloud> prepare_dataset(const Dataset& data, const RunConfig& cfg,
                                           LabelCache* cache) {
  const int n = static_cast<int>(data.clouds.size());
  std::vector<PreparedCloud> out(n);
  parallel_for(n, cfg.threads, [&](int i) {
    PointCloud cloud = data.clouds[i];
    if (cfg.partition.grouping == Grouping::kGeometryAware && cache && !cloud.has_labels()) {
      cloud.labels = cache->labels(cloud, cfg.partition.knn_k, cfg.partition.mu,
                                   cfg.partition.min_segments);
    }
    PatchSet patches = partition_pipeline(cloud, cfg.groups, cfg.partition);
    out[i] = prepare_cloud(cloud, patches, data.entries[i].class_id);
  });
  return out;
}

std::string format_metrics_csv(std::span<const StepDiagnostics> metrics) {
  std::string out = "step,epoch,loss,lr,tau_t,dead_fraction,codebook_drift\n";
  char buf[256];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof(buf), "%ld,%d,%.12g,%.12g,%.12g,%.12g,%.12g\n", m.step,
                  m.epoch, m.loss, m.lr, m.tau_t, m.dead_fraction, m.codebook_drift);
    out += buf;
  }
  return out;
}

LoopResult pretrain_loop(std::span<const PreparedCloud> clouds,
                         std::span<const int> train_indices, const RunConfig& cfg,
                         const LoopOptions& options) {
  cfg.validate();
  require(!train_indices.empty(), "pretrain_loop: empty training split");
  const int n_train = static_cast<int>(train_indices.size());
  const int batch_size = std::min(cfg.train.batch, n_train);
  const long steps_per_epoch = (n_train + batch_size - 1) / batch_size;
  const long planned = steps_per_epoch * cfg.train.epochs;
  // max_steps truncates the run; schedules still span the planned length.
  const StepSchedule schedule{planned,
                              std::min(planned, cfg.train.warmup_epochs * steps_per_epoch)};
  const long total =
      cfg.train.max_steps > 0 ? std::min(planned, cfg.train.max_steps) : planned;

  // Codebook seed pool: enough clouds for about four features per code.
  std::vector<PreparedCloud> pool;
  {
    const int tokens = std::max(1, cfg.groups);
    const int want = std::clamp(4 * cfg.codebook.size / tokens, 1, n_train);
    for (int i = 0; i < want; ++i) pool.push_back(clouds[train_indices[i]]);
  }

  LoopResult result;
  result.state = init_train_state(cfg, pool);
  TrainState& state = result.state;

  namespace fs = std::filesystem;
  const bool write = !options.out_dir.empty();
  if (write) fs::create_directories(options.out_dir);
  auto save = [&](const std::string& name) {
    save_checkpoint((fs::path(options.out_dir) / name).string(), pack_state(state, cfg));
  };

  std::vector<int> order(train_indices.begin(), train_indices.end());
  try {
    for (int epoch = 0; epoch < cfg.train.epochs && state.step < total; ++epoch) {
      state.epoch = epoch;
      state.codebook.reset_window();
      std::shuffle(order.begin(), order.end(), state.rng);
      EpochSummary summary;
      summary.epoch = epoch;
      Mat last_teacher;
      int steps = 0;
      for (int start = 0; start < n_train && state.step < total; start += batch_size) {
        std::vector<const PreparedCloud*> batch;
        for (int i = start; i < std::min(n_train, start + batch_size); ++i) {
          batch.push_back(&clouds[order[i]]);
        }
        StepDiagnostics d = pretrain_step(batch, state, cfg, schedule, &last_teacher);
        summary.mean_loss += d.loss;
        ++steps;
        result.metrics.push_back(d);
        if (options.on_step) options.on_step(d);
      }
      summary.mean_loss /= std::max(1, steps);
      summary.dead_fraction = dead_fraction(state.codebook, 0.0, CountWindow::kWindow);
      if (cfg.codebook.maintenance != MaintenanceMode::kOff && last_teacher.rows() > 0) {
        summary.maintenance =
            maintenance_step(state.codebook, last_teacher, cfg.codebook.maintenance, state.rng,
                             cfg.codebook.maintenance_epsilon, cfg.codebook.count_decay);
      }
      result.epochs.push_back(summary);
      if (options.on_epoch) options.on_epoch(summary, state);

      if (write) {
        write_file_atomic((fs::path(options.out_dir) / "metrics.csv").string(),
                          format_metrics_csv(result.metrics));
        save("checkpoint.bin");
        if (cfg.train.keep_all_checkpoints) save("checkpoint_" + epoch_tag(epoch) + ".bin");
        if (cfg.train.write_heatmaps) {
          utilization_export(state.codebook, cfg.codebook.heatmap_height,
                             cfg.codebook.heatmap_width,
                             (fs::path(options.out_dir) / "heatmaps" /
                              (epoch_tag(epoch) + ".pgm"))
                                 .string());
        }
      }
    }
  } catch (const NumericFault&) {
    if (write) save("fault_state.bin");
    throw;
  }
  return result;
}

Checkpoint pack_state(const TrainState& state, const RunConfig& cfg) {
  Checkpoint ckpt;
  ckpt.config_digest = cfg.digest();
  std::ostringstream meta;
  meta << cfg.canonical();
  meta << "#rng " << state.rng << "\n";
  ckpt.meta = meta.str();

  add_prefixed(ckpt.blocks, kStudentPrefix, state.student);
  add_prefixed(ckpt.blocks, kTeacherPrefix, state.teacher);
  add_prefixed(ckpt.blocks, kAdamMPrefix, state.optim.m);
  add_prefixed(ckpt.blocks, kAdamVPrefix, state.optim.v);
  const Codebook& cb = state.codebook;
  ckpt.blocks.set("codebook/C", cb.vectors);
  ckpt.blocks.set("codebook/N_acc", cb.counts);
  ckpt.blocks.set("codebook/M_acc", cb.sums);
  ckpt.blocks.set("codebook/update_count", cb.update_count);
  ckpt.blocks.set("codebook/window_count", cb.window_count.cast<double>());
  Mat scalars(1, 4);
  scalars << static_cast<double>(state.step), static_cast<double>(state.epoch),
      static_cast<double>(state.optim.t), cb.gamma;
  ckpt.blocks.set("state/scalars", scalars);
  return ckpt;
}

std::string checkpoint_config_text(const Checkpoint& ckpt) {
  std::string out;
  std::istringstream in(ckpt.meta);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) continue;
    out += line + "\n";
  }
  return out;
}

TrainState unpack_state(const Checkpoint& ckpt) {
  TrainState s;
  s.student = strip_prefix(ckpt.blocks, kStudentPrefix);
  s.teacher = strip_prefix(ckpt.blocks, kTeacherPrefix);
  s.optim.m = strip_prefix(ckpt.blocks, kAdamMPrefix);
  s.optim.v = strip_prefix(ckpt.blocks, kAdamVPrefix);
  require(s.student.num_blocks() > 0, "checkpoint: no student parameters");
  Codebook& cb = s.codebook;
  cb.vectors = ckpt.blocks.at("codebook/C");
  cb.counts = ckpt.blocks.at("codebook/N_acc");
  cb.sums = ckpt.blocks.at("codebook/M_acc");
  cb.update_count = ckpt.blocks.at("codebook/update_count");
  cb.window_count = ckpt.blocks.at("codebook/window_count").col(0).cast<int>();
  const Mat& scalars = ckpt.blocks.at("state/scalars");
  require(scalars.size() == 4, "checkpoint: malformed state/scalars");
  s.step = static_cast<long>(scalars(0, 0));
  s.epoch = static_cast<int>(scalars(0, 1));
  s.optim.t = static_cast<long>(scalars(0, 2));
  cb.gamma = scalars(0, 3);

  const auto pos = ckpt.meta.find("#rng ");
  if (pos != std::string::npos) {
    std::istringstream in(ckpt.meta.substr(pos + 5));
    in >> s.rng;
  }
  return s;
}

double nearest_centroid_accuracy(const Mat& train_x, std::span<const int> train_y,
                                 const Mat& test_x, std::span<const int> test_y) {
  require(static_cast<Eigen::Index>(train_y.size()) == train_x.rows() &&
              static_cast<Eigen::Index>(test_y.size()) == test_x.rows(),
          "nearest_centroid: one label per row required");
  require(train_x.rows() > 0 && test_x.rows() > 0, "nearest_centroid: empty split");
  const int classes = *std::max_element(train_y.begin(), train_y.end()) + 1;
  Mat centroids = Mat::Zero(classes, train_x.cols());
  Vec counts = Vec::Zero(classes);
  for (Eigen::Index r = 0; r < train_x.rows(); ++r) {
    centroids.row(train_y[r]) += train_x.row(r);
    counts(train_y[r]) += 1.0;
  }
  for (int c = 0; c < classes; ++c) {
    if (counts(c) > 0) centroids.row(c) /= counts(c);
  }
  int correct = 0;
  for (Eigen::Index r = 0; r < test_x.rows(); ++r) {
    int best = -1;
    double best_d = 0.0;
    for (int c = 0; c < classes; ++c) {
      if (counts(c) == 0) continue;
      const double dist = (test_x.row(r) - centroids.row(c)).squaredNorm();
      if (best < 0 || dist < best_d) {
        best = c;
        best_d = dist;
      }
    }
    if (best == test_y[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_x.rows());
}

Mat encoder_features(const ParamSet& student, std::span<const PreparedCloud> clouds,
                     std::span<const int> indices, const ModelConfig& cfg, int threads) {
  Mat out(static_cast<Eigen::Index>(indices.size()), cfg.dim);
  parallel_for(static_cast<int>(indices.size()), threads, [&](int i) {
    out.row(i) = cloud_feature(clouds[indices[i]], student, cfg).transpose();
  });
  return out;
}

double linear_probe(const ParamSet& student, std::span<const PreparedCloud> clouds,
                    std::span<const int> train, std::span<const int> val,
                    const ModelConfig& cfg, int threads) {
  auto labels = [&](std::span<const int> idx) {
    std::vector<int> y;
    for (int i : idx) y.push_back(clouds[i].class_id);
    return y;
  };
  const Mat xtr = encoder_features(student, clouds, train, cfg, threads);
  const Mat xva = encoder_features(student, clouds, val, cfg, threads);
  return nearest_centroid_accuracy(xtr, labels(train), xva, labels(val));
}

GradCheckReport pipeline_grad_check(const TrainState& state,
                                    std::span<const PreparedCloud* const> batch,
                                    const RunConfig& cfg, const GradCheckOptions& options) {
  std::mt19937_64 rng = state.rng;
  StudentTargets targets;
  targets.codes = state.codebook.vectors;
  const double tau = cfg.train.tau_teacher_start;
  for (const PreparedCloud* c : batch) {
    MaskSpec mask = random_mask(c->num_tokens(), cfg.train.mask_ratio, rng);
    const Mat t = teacher_forward(*c, state.teacher, cfg.model);
    Mat rows(static_cast<Eigen::Index>(mask.masked.size()), t.cols());
    for (std::size_t i = 0; i < mask.masked.size(); ++i) {
      rows.row(static_cast<Eigen::Index>(i)) = t.row(mask.masked[i]);
    }
    targets.q_teacher.push_back(soft_assign(rows, state.codebook, tau, cfg.codebook.similarity).probs);
    targets.masks.push_back(std::move(mask));
  }
  ScalarFn f = [&](ad::Tape& tape, const BoundParams& p) {
    return student_loss(tape, p, batch, targets, cfg);
  };
  return grad_check(f, state.student, options);
}

}  // namespace pgac

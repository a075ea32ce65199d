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

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pgac/autodiff.hpp"
#include "pgac/checkpoint.hpp"
#include "pgac/codebook.hpp"
#include "pgac/config.hpp"
#include "pgac/data.hpp"
#include "pgac/gradcheck.hpp"
#include "pgac/model.hpp"
#include "pgac/params.hpp"

namespace pgac {

struct MaskSpec {
  double ratio = 0.0;
  std::vector<int> masked;   // ⌊L·r⌋ sorted indices
  std::vector<int> visible;  // the rest, sorted
};

MaskSpec random_mask(int num_tokens, double ratio, std::mt19937_64& rng);

// Mean over rows of KL(q_teacher ‖ q_student).
double alignment_loss(const Mat& q_teacher, const Mat& q_student);
// Same loss with the student given as log-probabilities on the tape. The
// teacher side is a constant.
ad::Var alignment_loss(const Mat& q_teacher, ad::Var log_q_student);

// Student logits against a fixed codebook, divided by tau.
ad::Var student_logits(ad::Var features, const Mat& codes, double tau,
                       Similarity sim);

struct AdamState {
  ParamSet m;
  ParamSet v;
  long t = 0;
};

struct AdamWHyper {
  double lr = 1e-3;
  double weight_decay = 0.04;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState init_adam(const ParamSet& params);
// Bias-corrected Adam with decoupled decay: p ← p − lr·(m̂/(√v̂+eps) + wd·p).
void adamw_step(ParamSet& params, const ParamSet& grads, AdamState& state,
                const AdamWHyper& hyper);

// Linear warmup from 0 to lr_max over `warmup` steps, then cosine decay
// reaching lr_min at step total−1.
double lr_schedule(long step, long warmup, long total, double lr_max,
                   double lr_min);
// Cosine ramp from start (step 0) to end (step total).
double teacher_momentum(long step, long total, double start, double end);
// θ_t ← m·θ_t + (1−m)·θ_s for every teacher block.
void ema_teacher_update(ParamSet& teacher, const ParamSet& student,
                        double momentum);

struct TrainState {
  ParamSet student;
  ParamSet teacher;
  Codebook codebook;
  AdamState optim;
  long step = 0;
  int epoch = 0;
  std::mt19937_64 rng;
};

// Fresh parameters and optimizer; the codebook is seeded from teacher
// features of `pool` (must be non-empty).
TrainState init_train_state(const RunConfig& cfg,
                            std::span<const PreparedCloud> pool);

struct StepDiagnostics {
  long step = 0;
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  double tau_t = 0.0;
  double dead_fraction = 0.0;  // codes without an update this epoch so far
  double codebook_drift = 0.0;  // ‖C_after − C_before‖_F of this step
};

// Inputs of the student loss that do not depend on student parameters.
struct StudentTargets {
  std::vector<MaskSpec> masks;
  std::vector<Mat> q_teacher;  // masked rows only
  Mat codes;                   // codebook snapshot
};

// Batch-mean alignment loss as a function of the student parameters.
ad::Var student_loss(ad::Tape& tape, const BoundParams& p,
                     std::span<const PreparedCloud* const> batch,
                     const StudentTargets& targets, const RunConfig& cfg);

struct StepSchedule {
  long total = 1;   // steps in the whole run
  long warmup = 0;  // linear warmup steps
};

// One optimization step. Mutates the codebook (online k-means), student,
// optimizer and teacher. `teacher_features` receives the stacked teacher
// outputs of the batch when non-null.
StepDiagnostics pretrain_step(std::span<const PreparedCloud* const> batch,
                              TrainState& state, const RunConfig& cfg,
                              const StepSchedule& schedule,
                              Mat* teacher_features = nullptr);

// Partitions every cloud of the dataset (threads from cfg).
std::vector<PreparedCloud> prepare_dataset(const Dataset& data,
                                           const RunConfig& cfg,
                                           LabelCache* cache = nullptr);

struct EpochSummary {
  int epoch = 0;
  double mean_loss = 0.0;
  double dead_fraction = 0.0;  // window count at the end of the epoch
  MaintenanceReport maintenance;
};

struct LoopOptions {
  // Checkpoints, metrics.csv and heatmaps go here; empty disables output.
  std::string out_dir;
  std::function<void(const StepDiagnostics&)> on_step;
  std::function<void(const EpochSummary&, const TrainState&)> on_epoch;
};

struct LoopResult {
  TrainState state;
  std::vector<StepDiagnostics> metrics;
  std::vector<EpochSummary> epochs;
};

LoopResult pretrain_loop(std::span<const PreparedCloud> clouds,
                         std::span<const int> train_indices,
                         const RunConfig& cfg, const LoopOptions& options = {});

std::string format_metrics_csv(std::span<const StepDiagnostics> metrics);

Checkpoint pack_state(const TrainState& state, const RunConfig& cfg);
TrainState unpack_state(const Checkpoint& ckpt);
// Canonical config text stored in a checkpoint.
std::string checkpoint_config_text(const Checkpoint& ckpt);

// Nearest class centroid fitted on (train_x, train_y), scored on the test
// rows. Returns accuracy in [0, 1].
double nearest_centroid_accuracy(const Mat& train_x, std::span<const int> train_y,
                                 const Mat& test_x, std::span<const int> test_y);

// Cloud features from the student encoder, one row per index.
Mat encoder_features(const ParamSet& student, std::span<const PreparedCloud> clouds,
                     std::span<const int> indices, const ModelConfig& cfg,
                     int threads = 1);

double linear_probe(const ParamSet& student, std::span<const PreparedCloud> clouds,
                    std::span<const int> train, std::span<const int> val,
                    const ModelConfig& cfg, int threads = 1);

// Gradient check of the full student loss on `batch` with fresh targets
// drawn from `state`. Does not modify `state`.
GradCheckReport pipeline_grad_check(const TrainState& state,
                                    std::span<const PreparedCloud* const> batch,
                                    const RunConfig& cfg,
                                    const GradCheckOptions& options = {});

}  // namespace pgac

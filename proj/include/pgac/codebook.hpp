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

#include <random>
#include <span>
#include <string>
#include <vector>

#include "pgac/common.hpp"

namespace pgac {

// Online k-means codebook with EMA statistics.
//
//   N_k ← γ N_k + (1 − γ) n_k
//   M_k ← γ M_k + (1 − γ) m_k
//   c_k = M_k / N_k
//
// where n_k counts the features assigned to code k in a step and m_k is
// their sum.
struct Codebook {
  Mat vectors;  // K×D, c_k per row
  Vec counts;   // N_k
  Mat sums;     // M_k, K×D
  // x_k: steps in which code k received at least one feature. Halved after
  // each maintenance pass, so it tracks recent activity.
  Vec update_count;
  // Steps with n_k > 0 since the last reset_window(); never decayed.
  Eigen::VectorXi window_count;
  double gamma = 0.99;

  int size() const { return static_cast<int>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
  void reset_window() { window_count.setZero(); }
  // Largest |c_k − M_k/N_k| relative to max(1, |c_k|).
  double ratio_error() const;
};

enum class Similarity { kCosine, kDot };

// Draws K rows of `pool` without replacement after removing exact
// duplicates. A pool with fewer than K distinct rows is topped up with
// jittered copies so no two codes coincide. N_k = 1, M_k = c_k, x_k = 0.
Codebook init_codebook(const Mat& pool, int size, double gamma,
                       std::mt19937_64& rng, double jitter = 1e-3);

// Euclidean nearest code per row, ties to the lower index.
std::vector<int> nearest_code(const Mat& features, const Codebook& codebook);
// Most similar code per row under `sim`, ties to the lower index.
std::vector<int> nearest_code(const Mat& features, const Codebook& codebook,
                              Similarity sim);

// Applies one EMA step using `assignments` (one code per feature row).
void kmeans_update(Codebook& codebook, const Mat& features,
                   std::span<const int> assignments);

// rows×K similarity matrix; cosine normalizes both sides to unit length.
Mat similarity_logits(const Mat& features, const Mat& codes, Similarity sim);

struct Assignment {
  Mat probs;  // rows×K, row-stochastic
  std::vector<int> hard;
};

// Row softmax of similarity / τ.
Assignment soft_assign(const Mat& features, const Codebook& codebook,
                       double tau, Similarity sim = Similarity::kCosine);

// Cosine annealing from `start` at step 0 to `end` at `total`.
double teacher_temperature(long step, long total, double start = 0.07,
                           double end = 0.04);

enum class MaintenanceMode { kOff, kMeaningful, kRandom };

// α = 1 / (1 + exp(ε (x − x̄))).
double maintenance_weight(double count, double mean_count, double epsilon);

struct MaintenanceReport {
  std::vector<double> alpha;
  double epsilon = 0.0;
  double mean_count = 0.0;  // x̄ = (max x + min x) / 2
  // Codes with no update since the last window reset.
  int dead_count = 0;
  double max_shift = 0.0;  // largest ‖Δc_k‖
};

// Refreshes every code toward batch data, weighted by how rarely it is
// updated:
//   meaningful: c_k ← (1 − α_k) c_k + α_k t_k, t_k the most cosine-similar
//               row of `teacher_features`;
//   random:     same update with t_k a uniformly drawn row of
//               `teacher_features`.
// M_k is rescaled to keep c_k = M_k / N_k, then x is multiplied by
// `count_decay`. ε ≤ 0 selects 6 / (x_max − x_min + 1). kOff is a no-op.
MaintenanceReport maintenance_step(Codebook& codebook,
                                   const Mat& teacher_features,
                                   MaintenanceMode mode, std::mt19937_64& rng,
                                   double epsilon = 0.0,
                                   double count_decay = 0.5);

enum class CountWindow { kDecayed, kWindow };

// Fraction of codes whose count is <= threshold.
double dead_fraction(const Codebook& codebook, double threshold,
                     CountWindow window = CountWindow::kDecayed);

// Writes x reshaped to height×width as a binary PGM (P5), min-max scaled to
// [0, 255], and the raw counts as CSV next to it (`.csv` replacing `.pgm`).
// Returns the CSV path. Requires height·width = K.
std::string utilization_export(const Codebook& codebook, int height, int width,
                               const std::string& path);

}  // namespace pgac

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

#include <span>
#include <vector>

#include "pgac/common.hpp"
#include "pgac/geometry.hpp"

namespace pgac {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct TransportProblem {
  Mat cost;  // N×L
  Mask mask;  // N×L, true where point i may go to center j
  double epsilon = 0.05;
  int max_iters = 200;
  double tol = 1e-6;
};

struct TransportPlan {
  Mat plan;  // N×L
  bool converged = false;
  int iterations = 0;
  // Max |row sum − 1| and max |column sum − N/L| of the returned plan.
  double row_error = 0.0;
  double col_error = 0.0;
};

// T_ij = ‖p_i − c_j‖².
Mat build_cost_matrix(const Points& points, const Points& centers);

// M_ij = (point_labels[i] == center_labels[j]). Throws UnassignablePoint for
// a point whose label no center carries.
Mask build_label_mask(std::span<const int> point_labels,
                      std::span<const int> center_labels);

// ε = scale · mean cost over admissible entries.
double default_epsilon(const Mat& cost, const Mask& mask, double scale = 0.05);

// Log-domain Sinkhorn with row marginals 1 and column marginals N/L, masked
// entries pinned to exactly zero. Stops when the row error drops to tol or
// after max_iters; the plan is row-normalized on exit either way.
TransportPlan sinkhorn_masked(const TransportProblem& problem);

struct PatchSet {
  // Patch of each point. For the overlapping kNN baseline this is the nearest
  // center and patch_points is authoritative.
  std::vector<int> patch_of;
  Points centers;
  std::vector<int> center_labels;
  // Point index of each center in the cloud.
  std::vector<int> center_indices;
  std::vector<std::vector<int>> patch_points;
  // Point labels the partition was built against (after orphan segments were
  // folded into covered ones). Empty for the kNN baseline on unlabeled input.
  std::vector<int> point_labels;
  bool overlapping = false;

  int num_patches() const { return static_cast<int>(patch_points.size()); }
  int num_points() const { return static_cast<int>(patch_of.size()); }
};

// Hard assignment by row argmax of the plan over admissible centers (ties to
// the lower center), then empty patches steal the point with the highest
// plan mass toward them from the largest same-label patch.
PatchSet extract_patches(const Mat& plan, const Mask& mask,
                         const PointCloud& cloud, const Points& centers,
                         std::span<const int> center_labels);

// Disjoint, exhaustive, non-empty, label-pure. Throws InvalidArgument naming
// the first violation.
void check_partition(const PatchSet& patches);

// FPS centers, each grouped with its patch_size nearest points (the center
// itself included). Patches may overlap.
PatchSet knn_grouping(const PointCloud& cloud, int num_patches,
                      int patch_size);

enum class Grouping { kGeometryAware, kKnn };

struct PartitionConfig {
  Grouping grouping = Grouping::kGeometryAware;
  int knn_k = 16;
  double mu = 0.06;
  int min_segments = 1;
  double epsilon_scale = 0.05;
  int max_iters = 200;
  double tol = 1e-6;
  // 0 picks 2N/L.
  int knn_patch_size = 0;
};

// Segment geometric labels for a cloud (kNN graph, features, Potts merging).
std::vector<int> segment_cloud(const PointCloud& cloud, int k, double mu,
                               int min_segments = 1);

// Segmentation (skipped when the cloud already carries labels), FPS,
// masked transport, hard extraction. Segments that receive no center are
// folded into the segment of the nearest center first.
PatchSet partition_pipeline(const PointCloud& cloud, int num_patches,
                            const PartitionConfig& config);

}  // namespace pgac

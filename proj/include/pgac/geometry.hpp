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
#include <span>
#include <vector>

#include "pgac/common.hpp"

namespace pgac {

struct Neighbor {
  int index;
  double distance;
};

struct Edge {
  int a;  // a < b
  int b;
  double distance;
};

struct NeighborGraph {
  int k = 0;
  // Exactly k entries per point, ordered by (distance, index).
  std::vector<std::vector<Neighbor>> knn;
  // knn made symmetric: j ∈ adjacency[i] iff i ∈ adjacency[j]. Ordered by
  // index.
  std::vector<std::vector<Neighbor>> adjacency;

  int num_points() const { return static_cast<int>(knn.size()); }
  // Undirected edge set of `adjacency`, each edge once, sorted by (a, b).
  std::vector<Edge> edges() const;
};

// Exact k nearest neighbors by Euclidean distance, ties to the lower index,
// followed by a symmetrization pass. Requires 0 < k < N.
NeighborGraph build_knn_graph(const PointCloud& cloud, int k);

// N×4 rows of (linearity, planarity, scattering, verticality).
using GeometricFeatures = Mat;

inline constexpr int kNumGeometricFeatures = 4;
// Bumped whenever the feature definition changes; part of cache keys.
inline constexpr int kFeatureVersion = 1;

// Eigenvalue features of each point's neighborhood covariance (the point and
// its k nearest neighbors). Verticality is |z-component| of the eigenvector
// of the smallest eigenvalue. Degenerate neighborhoods give (0, 0, 1, 0).
GeometricFeatures compute_geometric_features(const PointCloud& cloud,
                                             const NeighborGraph& graph);

// w_ij = 1 / (1 + d_ij / mean edge length), aligned with graph.edges().
std::vector<double> edge_weights(const std::vector<Edge>& edges);

// Σ_i ‖g_i − f_i‖² + μ Σ_{(i,j)} w_ij [label_i ≠ label_j], with g_i the mean
// feature of the segment of i. Labels may be any non-negative ints.
double segmentation_energy(const GeometricFeatures& features,
                           const NeighborGraph& graph,
                           std::span<const int> labels, double mu);

struct Segmentation {
  // Compacted to [0, num_segments), numbered by first occurrence.
  std::vector<int> labels;
  int num_segments = 0;
  double energy = 0.0;
  // Energy after initialization and after every merge.
  std::vector<double> energy_trace;
};

struct PottsOptions {
  double mu = 0.06;
  // Merging stops once this many segments remain.
  int min_segments = 1;
  // Called with the current (uncompacted) labels and energy after
  // initialization and after every merge. Tests use it to audit the trace.
  std::function<void(std::span<const int>, double)> observer;
};

// Greedy region merging on the Potts objective: start from singletons and
// repeatedly merge the adjacent pair with the largest energy decrease until
// no merge decreases the energy. At such a stall a lookahead keeps merging
// the cheapest pair (uphill allowed) down to the segment floor; when a state
// on that path has lower energy the solver jumps to it and resumes. The
// energy never increases, and with min_segments = 1 the result is never
// worse than the single-segment labeling.
Segmentation potts_segmentation(const GeometricFeatures& features,
                                const NeighborGraph& graph,
                                const PottsOptions& options);

struct FpsResult {
  std::vector<int> indices;
  // Labels of the chosen points; empty when the cloud is unlabeled.
  std::vector<int> labels;
};

// Farthest point sampling. The seed is the point farthest from the centroid;
// every later pick maximizes the distance to the chosen set. Ties go to the
// lowest index. Requires 1 <= count <= N.
FpsResult fps_sample(const PointCloud& cloud, int count);

}  // namespace pgac

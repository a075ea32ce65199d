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

#include "pgac/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace pgac {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log Σ exp over the finite entries of a sequence; -inf when none.
template <typename Get>
double log_sum_exp(Eigen::Index n, Get get) {
  double m = kNegInf;
  for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, get(i));
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = get(i);
    if (v != kNegInf) s += std::exp(v - m);
  }
  return m + std::log(s);
}

}  // namespace

Mat build_cost_matrix(const Points& points, const Points& centers) {
  Mat cost(points.rows(), centers.rows());
  for (Eigen::Index j = 0; j < centers.rows(); ++j) {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      cost(i, j) = (points.row(i) - centers.row(j)).squaredNorm();
    }
  }
  return cost;
}

Mask build_label_mask(std::span<const int> point_labels,
                      std::span<const int> center_labels) {
  const auto n = static_cast<Eigen::Index>(point_labels.size());
  const auto l = static_cast<Eigen::Index>(center_labels.size());
  Mask mask(n, l);
  for (Eigen::Index i = 0; i < n; ++i) {
    bool any = false;
    for (Eigen::Index j = 0; j < l; ++j) {
      mask(i, j) = point_labels[i] == center_labels[j];
      any = any || mask(i, j);
    }
    if (!any) throw UnassignablePoint(static_cast<int>(i), point_labels[i]);
  }
  return mask;
}

double default_epsilon(const Mat& cost, const Mask& mask, double scale) {
  double sum = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index j = 0; j < cost.cols(); ++j) {
    for (Eigen::Index i = 0; i < cost.rows(); ++i) {
      if (!mask(i, j)) continue;
      sum += cost(i, j);
      ++count;
    }
  }
  const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
  return mean > 0.0 ? scale * mean : scale;
}

TransportPlan sinkhorn_masked(const TransportProblem& p) {
  const Eigen::Index n = p.cost.rows(), l = p.cost.cols();
  require(n > 0 && l > 0, "sinkhorn_masked: empty problem");
  require(p.mask.rows() == n && p.mask.cols() == l,
          "sinkhorn_masked: mask shape differs from cost shape");
  require(p.epsilon > 0.0, "sinkhorn_masked: epsilon must be positive");
  require(p.max_iters > 0, "sinkhorn_masked: max_iters must be positive");
  require(p.tol > 0.0, "sinkhorn_masked: tol must be positive");
  for (Eigen::Index i = 0; i < n; ++i) {
    require(p.mask.row(i).any(),
            "sinkhorn_masked: row " + std::to_string(i) + " has no admissible center");
  }
  for (Eigen::Index j = 0; j < l; ++j) {
    require(p.mask.col(j).any(),
            "sinkhorn_masked: column " + std::to_string(j) + " has no admissible point");
  }

  Mat logk(n, l);
  for (Eigen::Index j = 0; j < l; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (p.mask(i, j)) {
        require(std::isfinite(p.cost(i, j)), "sinkhorn_masked: non-finite cost");
        logk(i, j) = -p.cost(i, j) / p.epsilon;
      } else {
        logk(i, j) = kNegInf;
      }
    }
  }
  // Scaling iterations on a kernel stabilized by the dual potentials f, g.
  // Whenever the scalings u, v drift far from 1 they are absorbed into the
  // potentials and the kernel is rebuilt, so nothing underflows.
  const double b = static_cast<double>(n) / static_cast<double>(l);
  const double log_b = std::log(b);
  Vec f(n), g = Vec::Zero(l);
  for (Eigen::Index i = 0; i < n; ++i) f(i) = -logk.row(i).maxCoeff();

  Mat kernel(n, l);
  auto rebuild = [&] {
    for (Eigen::Index j = 0; j < l; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        kernel(i, j) = p.mask(i, j) ? std::exp(logk(i, j) + f(i) + g(j)) : 0.0;
      }
    }
  };
  auto log_update_rows = [&] {
    for (Eigen::Index i = 0; i < n; ++i) {
      f(i) = -log_sum_exp(l, [&](Eigen::Index j) { return g(j) + logk(i, j); });
    }
  };
  auto log_update_cols = [&] {
    for (Eigen::Index j = 0; j < l; ++j) {
      g(j) = log_b - log_sum_exp(n, [&](Eigen::Index i) { return f(i) + logk(i, j); });
    }
  };
  constexpr double kTiny = 1e-280;
  constexpr double kAbsorb = 1e30;
  Vec u = Vec::Ones(n), v = Vec::Ones(l);
  auto absorb = [&] {
    f.array() += u.array().log();
    g.array() += v.array().log();
    u.setOnes();
    v.setOnes();
    rebuild();
  };
  // Row update u = 1 / (K v); falls back to the log domain on underflow.
  auto update_rows = [&] {
    Vec kv = kernel * v;
    if (kv.minCoeff() > kTiny) {
      u = kv.cwiseInverse();
    } else {
      g.array() += v.array().log();
      v.setOnes();
      log_update_rows();
      u.setOnes();
      rebuild();
    }
  };
  auto update_cols = [&] {
    Vec ku = kernel.transpose() * u;
    if (ku.minCoeff() > kTiny) {
      v = b * ku.cwiseInverse();
    } else {
      f.array() += u.array().log();
      u.setOnes();
      log_update_cols();
      v.setOnes();
      rebuild();
    }
  };

  rebuild();
  TransportPlan out;
  for (int it = 1; it <= p.max_iters; ++it) {
    update_rows();
    update_cols();
    out.iterations = it;
    const double err = (u.cwiseProduct(kernel * v).array() - 1.0).abs().maxCoeff();
    if (err <= p.tol) {
      out.converged = true;
      break;
    }
    if (u.maxCoeff() > kAbsorb || v.maxCoeff() > kAbsorb || u.minCoeff() < 1.0 / kAbsorb ||
        v.minCoeff() < 1.0 / kAbsorb) {
      absorb();
    }
  }
  update_rows();

  out.plan = (u.asDiagonal() * kernel) * v.asDiagonal();
  const double target = static_cast<double>(n) / static_cast<double>(l);
  out.row_error = (out.plan.rowwise().sum().array() - 1.0).abs().maxCoeff();
  out.col_error = (out.plan.colwise().sum().array() - target).abs().maxCoeff();
  return out;
}

PatchSet extract_patches(const Mat& plan, const Mask& mask,
                         const PointCloud& cloud, const Points& centers,
                         std::span<const int> center_labels) {
  const int n = cloud.size();
  const auto l = static_cast<int>(centers.rows());
  require(plan.rows() == n && plan.cols() == l, "extract_patches: plan shape");
  require(mask.rows() == n && mask.cols() == l, "extract_patches: mask shape");
  require(static_cast<int>(center_labels.size()) == l,
          "extract_patches: center label count");

  PatchSet out;
  out.centers = centers;
  out.center_labels.assign(center_labels.begin(), center_labels.end());
  out.point_labels = cloud.labels;
  out.patch_of.assign(n, -1);
  std::vector<int> size(l, 0);
  for (int i = 0; i < n; ++i) {
    int best = -1;
    for (int j = 0; j < l; ++j) {
      if (!mask(i, j)) continue;
      if (best < 0 || plan(i, j) > plan(i, best)) best = j;
    }
    if (best < 0) {
      throw UnassignablePoint(i, cloud.has_labels() ? cloud.labels[i] : -1);
    }
    out.patch_of[i] = best;
    ++size[best];
  }

  for (int j = 0; j < l; ++j) {
    if (size[j] > 0) continue;
    int donor = -1;
    for (int d = 0; d < l; ++d) {
      if (d == j || center_labels[d] != center_labels[j] || size[d] < 2) continue;
      if (donor < 0 || size[d] > size[donor]) donor = d;
    }
    int pick = -1;
    if (donor >= 0) {
      for (int i = 0; i < n; ++i) {
        if (out.patch_of[i] != donor || !mask(i, j)) continue;
        if (pick < 0 || plan(i, j) > plan(pick, j)) pick = i;
      }
    }
    if (pick < 0) {
      throw InvalidArgument("extract_patches: patch " + std::to_string(j) +
                            " cannot be made non-empty");
    }
    out.patch_of[pick] = j;
    --size[donor];
    ++size[j];
  }

  out.patch_points.assign(l, {});
  for (int i = 0; i < n; ++i) out.patch_points[out.patch_of[i]].push_back(i);
  return out;
}

void check_partition(const PatchSet& p) {
  const int n = p.num_points();
  const int l = p.num_patches();
  require(p.centers.rows() == l, "partition: center count differs from patch count");
  require(static_cast<int>(p.center_labels.size()) == l,
          "partition: center label count differs from patch count");
  std::vector<int> seen(n, 0);
  for (int j = 0; j < l; ++j) {
    require(!p.patch_points[j].empty(), "partition: patch " + std::to_string(j) + " is empty");
    for (int i : p.patch_points[j]) {
      require(i >= 0 && i < n, "partition: point index out of range");
      require(seen[i] == 0, "partition: point " + std::to_string(i) + " in two patches");
      require(p.patch_of[i] == j, "partition: patch_of disagrees with patch_points");
      seen[i] = 1;
    }
  }
  for (int i = 0; i < n; ++i) {
    require(seen[i] == 1, "partition: point " + std::to_string(i) + " unassigned");
  }
  if (!p.point_labels.empty()) {
    require(static_cast<int>(p.point_labels.size()) == n, "partition: label count");
    for (int i = 0; i < n; ++i) {
      require(p.point_labels[i] == p.center_labels[p.patch_of[i]],
              "partition: point " + std::to_string(i) + " breaks label purity");
    }
  }
}

PatchSet knn_grouping(const PointCloud& cloud, int num_patches,
                      int patch_size) {
  const int n = cloud.size();
  require(num_patches >= 1 && num_patches <= n, "knn_grouping: need 1 <= L <= N");
  require(patch_size >= 1 && patch_size <= n, "knn_grouping: need 1 <= patch_size <= N");
  const FpsResult fps = fps_sample(cloud, num_patches);

  PatchSet out;
  out.overlapping = true;
  out.center_indices = fps.indices;
  out.centers.resize(num_patches, 3);
  for (int j = 0; j < num_patches; ++j) {
    out.centers.row(j) = cloud.points.row(fps.indices[j]);
  }
  out.center_labels = cloud.has_labels() ? fps.labels : std::vector<int>(num_patches, 0);
  out.point_labels = cloud.labels;

  std::vector<std::pair<double, int>> cand(n);
  for (int j = 0; j < num_patches; ++j) {
    for (int i = 0; i < n; ++i) {
      cand[i] = {(cloud.points.row(i) - out.centers.row(j)).norm(), i};
    }
    std::partial_sort(cand.begin(), cand.begin() + patch_size, cand.end());
    std::vector<int> members;
    for (int r = 0; r < patch_size; ++r) members.push_back(cand[r].second);
    std::sort(members.begin(), members.end());
    out.patch_points.push_back(std::move(members));
  }
  out.patch_of.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < num_patches; ++j) {
      const double d = (cloud.points.row(i) - out.centers.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        out.patch_of[i] = j;
      }
    }
  }
  return out;
}

std::vector<int> segment_cloud(const PointCloud& cloud, int k, double mu,
                               int min_segments) {
  const int n = cloud.size();
  if (n == 1) return {0};
  const NeighborGraph graph = build_knn_graph(cloud, std::min(k, n - 1));
  const GeometricFeatures f = compute_geometric_features(cloud, graph);
  PottsOptions opts;
  opts.mu = mu;
  opts.min_segments = min_segments;
  return potts_segmentation(f, graph, opts).labels;
}

PatchSet partition_pipeline(const PointCloud& cloud, int num_patches,
                            const PartitionConfig& config) {
  cloud.validate();
  const int n = cloud.size();
  require(num_patches >= 1 && num_patches <= n,
          "partition: need 1 <= L <= N (L=" + std::to_string(num_patches) +
              ", N=" + std::to_string(n) + ")");

  if (config.grouping == Grouping::kKnn) {
    int size = config.knn_patch_size > 0 ? config.knn_patch_size
                                         : 2 * n / num_patches;
    size = std::clamp(size, 1, n);
    return knn_grouping(cloud, num_patches, size);
  }

  PointCloud labeled = cloud;
  if (!labeled.has_labels()) {
    labeled.labels = segment_cloud(cloud, config.knn_k, config.mu, config.min_segments);
  }
  const FpsResult fps = fps_sample(labeled, num_patches);

  // Fold segments without a center into the segment of the nearest center.
  std::set<int> covered(fps.labels.begin(), fps.labels.end());
  std::map<int, int> remap;
  for (int i = 0; i < n; ++i) {
    const int s = labeled.labels[i];
    if (covered.count(s) || remap.count(s)) continue;
    double best = std::numeric_limits<double>::infinity();
    int target = fps.labels[0];
    for (int q = 0; q < n; ++q) {
      if (labeled.labels[q] != s) continue;
      for (int j = 0; j < num_patches; ++j) {
        const double d =
            (labeled.points.row(q) - labeled.points.row(fps.indices[j])).squaredNorm();
        if (d < best) {
          best = d;
          target = fps.labels[j];
        }
      }
    }
    remap[s] = target;
  }
  for (int& lab : labeled.labels) {
    auto it = remap.find(lab);
    if (it != remap.end()) lab = it->second;
  }

  Points centers(num_patches, 3);
  for (int j = 0; j < num_patches; ++j) {
    centers.row(j) = labeled.points.row(fps.indices[j]);
  }
  TransportProblem prob;
  prob.cost = build_cost_matrix(labeled.points, centers);
  prob.mask = build_label_mask(labeled.labels, fps.labels);
  prob.epsilon = default_epsilon(prob.cost, prob.mask, config.epsilon_scale);
  prob.max_iters = config.max_iters;
  prob.tol = config.tol;
  const TransportPlan plan = sinkhorn_masked(prob);

  PatchSet out = extract_patches(plan.plan, prob.mask, labeled, centers, fps.labels);
  out.center_indices = fps.indices;
  return out;
}

}  // namespace pgac

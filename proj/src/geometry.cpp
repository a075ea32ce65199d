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

#include "pgac/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <tuple>

#include <Eigen/Eigenvalues>

namespace pgac {

std::vector<Edge> NeighborGraph::edges() const {
  std::vector<Edge> out;
  for (int i = 0; i < num_points(); ++i) {
    for (const Neighbor& nb : adjacency[i]) {
      if (nb.index > i) out.push_back({i, nb.index, nb.distance});
    }
  }
  return out;
}

NeighborGraph build_knn_graph(const PointCloud& cloud, int k) {
  cloud.validate();
  const int n = cloud.size();
  if (k <= 0 || k >= n) {
    throw InvalidArgument("build_knn_graph: need 0 < k < N (k=" +
                          std::to_string(k) + ", N=" + std::to_string(n) +
                          ")");
  }
  NeighborGraph g;
  g.k = k;
  g.knn.resize(n);
  std::vector<Neighbor> cand;
  cand.reserve(n);
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance ||
           (a.distance == b.distance && a.index < b.index);
  };
  for (int i = 0; i < n; ++i) {
    cand.clear();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      cand.push_back({j, (cloud.points.row(i) - cloud.points.row(j)).norm()});
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), closer);
    g.knn[i].assign(cand.begin(), cand.begin() + k);
  }

  g.adjacency.resize(n);
  for (int i = 0; i < n; ++i) {
    for (const Neighbor& nb : g.knn[i]) {
      g.adjacency[i].push_back(nb);
      g.adjacency[nb.index].push_back({i, nb.distance});
    }
  }
  for (auto& list : g.adjacency) {
    std::sort(list.begin(), list.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
    list.erase(std::unique(list.begin(), list.end(),
                           [](const Neighbor& a, const Neighbor& b) {
                             return a.index == b.index;
                           }),
               list.end());
  }
  return g;
}

GeometricFeatures compute_geometric_features(const PointCloud& cloud,
                                             const NeighborGraph& graph) {
  const int n = cloud.size();
  require(graph.num_points() == n, "graph and cloud sizes differ");
  GeometricFeatures f(n, kNumGeometricFeatures);
  for (int i = 0; i < n; ++i) {
    const auto& nbs = graph.knn[i];
    const double m = static_cast<double>(nbs.size() + 1);
    Vec3 mean = cloud.points.row(i).transpose();
    for (const Neighbor& nb : nbs) mean += cloud.points.row(nb.index).transpose();
    mean /= m;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    auto add = [&](int idx) {
      const Vec3 d = cloud.points.row(idx).transpose() - mean;
      cov += d * d.transpose();
    };
    add(i);
    for (const Neighbor& nb : nbs) add(nb.index);
    cov /= m;

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const Vec3 ev = es.eigenvalues().cwiseMax(0.0);  // ascending
    const double l1 = ev(2), l2 = ev(1), l3 = ev(0);
    if (!(l1 > 1e-18)) {
      f.row(i) << 0.0, 0.0, 1.0, 0.0;
      continue;
    }
    f(i, 0) = (l1 - l2) / l1;
    f(i, 1) = (l2 - l3) / l1;
    f(i, 2) = l3 / l1;
    f(i, 3) = std::min(1.0, std::abs(es.eigenvectors()(2, 0)));
  }
  return f;
}

std::vector<double> edge_weights(const std::vector<Edge>& edges) {
  std::vector<double> w(edges.size(), 1.0);
  if (edges.empty()) return w;
  double mean = 0.0;
  for (const Edge& e : edges) mean += e.distance;
  mean /= static_cast<double>(edges.size());
  if (mean <= 0.0) return w;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    w[i] = 1.0 / (1.0 + edges[i].distance / mean);
  }
  return w;
}

double segmentation_energy(const GeometricFeatures& features,
                           const NeighborGraph& graph,
                           std::span<const int> labels, double mu) {
  const int n = static_cast<int>(features.rows());
  require(static_cast<int>(labels.size()) == n, "label count mismatch");
  require(graph.num_points() == n, "graph and features sizes differ");
  std::map<int, std::pair<Vec, int>> seg;
  for (int i = 0; i < n; ++i) {
    auto [it, inserted] =
        seg.try_emplace(labels[i], Vec::Zero(features.cols()), 0);
    it->second.first += features.row(i).transpose();
    it->second.second += 1;
  }
  double data = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& s = seg.at(labels[i]);
    const Vec g = s.first / s.second;
    data += (g - features.row(i).transpose()).squaredNorm();
  }
  const auto edges = graph.edges();
  const auto w = edge_weights(edges);
  double pair = 0.0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (labels[edges[e].a] != labels[edges[e].b]) pair += w[e];
  }
  return data + mu * pair;
}

namespace {

struct Region {
  int size = 0;
  Vec sum;
  std::map<int, double> boundary;  // neighbor region -> Σ w over cut edges
  std::vector<int> members;
  int version = 0;
  bool alive = true;
};

struct Candidate {
  double delta;
  int a, b;
  int va, vb;
  bool operator>(const Candidate& o) const {
    return std::tie(delta, a, b) > std::tie(o.delta, o.a, o.b);
  }
};

// Energy change of merging regions x and y.
double merge_delta(const Region& x, const Region& y, double w, double mu) {
  const double nx = x.size, ny = y.size;
  const double fit = nx * ny / (nx + ny) * (x.sum / nx - y.sum / ny).squaredNorm();
  return fit - mu * w;
}

}  // namespace

Segmentation potts_segmentation(const GeometricFeatures& features,
                                const NeighborGraph& graph,
                                const PottsOptions& options) {
  const int n = static_cast<int>(features.rows());
  require(graph.num_points() == n, "graph and features sizes differ");
  require(options.mu > 0.0, "potts_segmentation: mu must be positive");
  // Merges whose gain is within rounding of zero are not taken.
  constexpr double kMinGain = 1e-12;

  const auto edges = graph.edges();
  const auto w = edge_weights(edges);
  std::vector<Region> regions(n);
  std::vector<int> label(n);
  double energy = 0.0;
  for (int i = 0; i < n; ++i) {
    regions[i].size = 1;
    regions[i].sum = features.row(i).transpose();
    regions[i].members = {i};
    label[i] = i;
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    regions[edges[e].a].boundary[edges[e].b] += w[e];
    regions[edges[e].b].boundary[edges[e].a] += w[e];
    energy += options.mu * w[e];
  }

  Segmentation out;
  out.energy_trace.push_back(energy);
  if (options.observer) options.observer(label, energy);

  // Folds region b into region a. `label` may be null during lookahead.
  auto merge = [](std::vector<Region>& rs, int a, int b, std::vector<int>* label) {
    Region& ra = rs[a];
    Region& rb = rs[b];
    ra.size += rb.size;
    ra.sum += rb.sum;
    if (label) {
      for (int m : rb.members) (*label)[m] = a;
    }
    ra.members.insert(ra.members.end(), rb.members.begin(), rb.members.end());
    ra.boundary.erase(b);
    for (const auto& [nb, weight] : rb.boundary) {
      if (nb == a) continue;
      ra.boundary[nb] += weight;
      auto& nbb = rs[nb].boundary;
      nbb.erase(b);
      nbb[a] += weight;
    }
    rb.alive = false;
    rb.boundary.clear();
    rb.members.clear();
    ++ra.version;
    ++rb.version;
  };

  const int floor = std::max(1, options.min_segments);
  int alive = n;
  while (true) {
    // Greedy descent over adjacent pairs.
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap;
    auto push = [&](int a, int b) {
      if (a > b) std::swap(a, b);
      const double d =
          merge_delta(regions[a], regions[b], regions[a].boundary.at(b), options.mu);
      if (d < -kMinGain) heap.push({d, a, b, regions[a].version, regions[b].version});
    };
    for (int r = 0; r < n; ++r) {
      if (!regions[r].alive) continue;
      for (const auto& [nb, _] : regions[r].boundary) {
        if (r < nb) push(r, nb);
      }
    }
    while (!heap.empty() && alive > floor) {
      const Candidate c = heap.top();
      heap.pop();
      const Region& ra = regions[c.a];
      const Region& rb = regions[c.b];
      if (!ra.alive || !rb.alive || ra.version != c.va || rb.version != c.vb) continue;
      energy += c.delta;
      merge(regions, c.a, c.b, &label);
      --alive;
      out.energy_trace.push_back(energy);
      if (options.observer) options.observer(label, energy);
      for (const auto& [nb, _] : regions[c.a].boundary) push(c.a, nb);
    }
    if (alive <= floor) break;

    // Lookahead: keep merging the cheapest pair, uphill steps included,
    // down to the floor. Adjacent pairs go first; disconnected pieces are
    // joined once no adjacent pair is left. If some state on that path
    // beats the local minimum, jump there as one compound move.
    std::vector<Region> trial = regions;
    std::vector<std::pair<int, int>> path;
    double e = energy, best_e = energy;
    std::size_t best_len = 0;
    int trial_alive = alive;
    while (trial_alive > floor) {
      double best_d = std::numeric_limits<double>::infinity();
      int ba = -1, bb = -1;
      for (int r = 0; r < n; ++r) {
        if (!trial[r].alive) continue;
        for (const auto& [nb, weight] : trial[r].boundary) {
          if (nb <= r) continue;
          const double d = merge_delta(trial[r], trial[nb], weight, options.mu);
          if (d < best_d) {
            best_d = d;
            ba = r;
            bb = nb;
          }
        }
      }
      if (ba < 0) {
        for (int r = 0; r < n; ++r) {
          if (!trial[r].alive) continue;
          for (int q = r + 1; q < n; ++q) {
            if (!trial[q].alive) continue;
            const double d = merge_delta(trial[r], trial[q], 0.0, options.mu);
            if (d < best_d) {
              best_d = d;
              ba = r;
              bb = q;
            }
          }
        }
      }
      if (ba < 0) break;
      merge(trial, ba, bb, nullptr);
      --trial_alive;
      e += best_d;
      path.emplace_back(ba, bb);
      if (e < best_e - kMinGain) {
        best_e = e;
        best_len = path.size();
      }
    }
    if (best_len == 0) break;
    for (std::size_t t = 0; t < best_len; ++t) {
      merge(regions, path[t].first, path[t].second, &label);
      --alive;
    }
    energy = segmentation_energy(features, graph, label, options.mu);
    out.energy_trace.push_back(energy);
    if (options.observer) options.observer(label, energy);
  }

  std::map<int, int> compact;
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    auto [it, _] = compact.try_emplace(label[i], static_cast<int>(compact.size()));
    out.labels[i] = it->second;
  }
  out.num_segments = static_cast<int>(compact.size());
  out.energy = segmentation_energy(features, graph, out.labels, options.mu);
  return out;
}

FpsResult fps_sample(const PointCloud& cloud, int count) {
  cloud.validate();
  const int n = cloud.size();
  if (count < 1 || count > n) {
    throw InvalidArgument("fps_sample: need 1 <= L <= N (L=" +
                          std::to_string(count) + ", N=" + std::to_string(n) +
                          ")");
  }
  const Eigen::RowVector3d centroid = cloud.points.colwise().mean();
  int seed = 0;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = (cloud.points.row(i) - centroid).squaredNorm();
    if (d > best) {
      best = d;
      seed = i;
    }
  }
  FpsResult out;
  out.indices.reserve(count);
  std::vector<double> mind(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  int next = seed;
  for (int c = 0; c < count; ++c) {
    out.indices.push_back(next);
    chosen[next] = 1;
    const auto p = cloud.points.row(next);
    int arg = -1;
    double far = -1.0;
    for (int i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      mind[i] = std::min(mind[i], (cloud.points.row(i) - p).squaredNorm());
      if (mind[i] > far) {
        far = mind[i];
        arg = i;
      }
    }
    next = arg;
  }
  if (cloud.has_labels()) {
    for (int idx : out.indices) out.labels.push_back(cloud.labels[idx]);
  }
  return out;
}

}  // namespace pgac

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

#include <algorithm>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "pgac/geometry.hpp"
#include "test_util.hpp"

namespace pgac {
namespace {

using testing::random_cloud;

TEST(KnnGraph, CollinearPoints) {
  PointCloud c;
  c.points.resize(3, 3);
  c.points << 0, 0, 0, 1, 0, 0, 2, 0, 0;
  NeighborGraph g = build_knn_graph(c, 1);
  ASSERT_EQ(g.knn[0].size(), 1u);
  EXPECT_EQ(g.knn[0][0].index, 1);
  // Point 1 is equidistant from 0 and 2; the lower index wins.
  EXPECT_EQ(g.knn[1][0].index, 0);
  EXPECT_EQ(g.knn[2][0].index, 1);
  ASSERT_EQ(g.adjacency[1].size(), 2u);
  EXPECT_EQ(g.adjacency[1][0].index, 0);
  EXPECT_EQ(g.adjacency[1][1].index, 2);
}

TEST(KnnGraph, MatchesAllPairsSort) {
  std::mt19937_64 rng(7);
  for (int n : {9, 64, 131, 256}) {
    for (int k : {1, 4, 8}) {
      PointCloud c = random_cloud(n, rng);
      NeighborGraph g = build_knn_graph(c, k);
      for (int i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> all;
        for (int j = 0; j < n; ++j) {
          if (j != i) all.push_back({(c.points.row(i) - c.points.row(j)).norm(), j});
        }
        std::sort(all.begin(), all.end());
        ASSERT_EQ(static_cast<int>(g.knn[i].size()), k);
        for (int r = 0; r < k; ++r) {
          EXPECT_EQ(g.knn[i][r].index, all[r].second);
          EXPECT_NEAR(g.knn[i][r].distance, all[r].first, 1e-15);
        }
      }
    }
  }
}

TEST(KnnGraph, SymmetrizedWithoutSelfLoops) {
  std::mt19937_64 rng(3);
  PointCloud c = random_cloud(100, rng);
  NeighborGraph g = build_knn_graph(c, 6);
  for (int i = 0; i < 100; ++i) {
    std::set<int> adj;
    for (const auto& nb : g.adjacency[i]) {
      EXPECT_NE(nb.index, i);
      EXPECT_GE(nb.distance, 0.0);
      adj.insert(nb.index);
      const auto& back = g.adjacency[nb.index];
      EXPECT_TRUE(std::any_of(back.begin(), back.end(),
                              [&](const Neighbor& x) { return x.index == i; }));
    }
    for (const auto& nb : g.knn[i]) EXPECT_TRUE(adj.count(nb.index));
  }
  for (const Edge& e : g.edges()) EXPECT_LT(e.a, e.b);
}

TEST(KnnGraph, RejectsKAtLeastN) {
  std::mt19937_64 rng(1);
  PointCloud c = random_cloud(5, rng);
  EXPECT_THROW(build_knn_graph(c, 5), InvalidArgument);
  EXPECT_THROW(build_knn_graph(c, 0), InvalidArgument);
}

TEST(GeometricFeatures, LineSample) {
  PointCloud c;
  c.points.resize(20, 3);
  for (int i = 0; i < 20; ++i) c.points.row(i) << 0.1 * i, 0.05 * i, -0.02 * i;
  Mat f = compute_geometric_features(c, build_knn_graph(c, 5));
  for (int i = 0; i < 20; ++i) {
    EXPECT_NEAR(f(i, 0), 1.0, 1e-9);
    EXPECT_NEAR(f(i, 1), 0.0, 1e-9);
    EXPECT_NEAR(f(i, 2), 0.0, 1e-9);
  }
}

TEST(GeometricFeatures, HorizontalPlane) {
  std::mt19937_64 rng(5);
  PointCloud c = random_cloud(60, rng);
  c.points.col(2).setZero();
  Mat f = compute_geometric_features(c, build_knn_graph(c, 8));
  for (int i = 0; i < 60; ++i) {
    EXPECT_NEAR(f(i, 2), 0.0, 1e-9);
    EXPECT_NEAR(f(i, 3), 1.0, 1e-9);
    EXPECT_GT(f(i, 1), 0.0);
  }
}

TEST(GeometricFeatures, MatchesJacobiOracle) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointCloud c;
  c.points.resize(32, 3);
  for (int i = 0; i < 32; ++i) {
    Vec3 v(g(rng), g(rng), g(rng));
    c.points.row(i) = (v.normalized() * std::cbrt(u(rng))).transpose();
  }
  const int k = 10;
  NeighborGraph graph = build_knn_graph(c, k);
  Mat f = compute_geometric_features(c, graph);
  for (int i = 0; i < 32; ++i) {
    std::vector<int> hood{i};
    for (const auto& nb : graph.knn[i]) hood.push_back(nb.index);
    Vec3 mean = Vec3::Zero();
    for (int j : hood) mean += c.points.row(j).transpose();
    mean /= hood.size();
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int j : hood) {
      Vec3 d = c.points.row(j).transpose() - mean;
      cov += d * d.transpose();
    }
    cov /= hood.size();
    Eigen::Vector3d lam;
    Eigen::Matrix3d vec;
    testing::jacobi_eigen3(cov, lam, vec);
    EXPECT_NEAR(f(i, 0), (lam(0) - lam(1)) / lam(0), 1e-9);
    EXPECT_NEAR(f(i, 1), (lam(1) - lam(2)) / lam(0), 1e-9);
    EXPECT_NEAR(f(i, 2), lam(2) / lam(0), 1e-9);
    EXPECT_NEAR(f(i, 3), std::abs(vec(2, 2)), 1e-9);
  }
}

TEST(GeometricFeatures, RangeAndPartitionOfUnity) {
  std::mt19937_64 rng(2);
  PointCloud c = random_cloud(200, rng);
  Mat f = compute_geometric_features(c, build_knn_graph(c, 12));
  for (int i = 0; i < 200; ++i) {
    for (int d = 0; d < 4; ++d) {
      EXPECT_GE(f(i, d), 0.0);
      EXPECT_LE(f(i, d), 1.0);
    }
    EXPECT_NEAR(f(i, 0) + f(i, 1) + f(i, 2), 1.0, 1e-9);
  }
}

TEST(GeometricFeatures, DegenerateNeighborhoodDefaultRow) {
  PointCloud c;
  c.points = Points::Zero(6, 3);
  Mat f = compute_geometric_features(c, build_knn_graph(c, 3));
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(f(i, 0), 0.0);
    EXPECT_EQ(f(i, 1), 0.0);
    EXPECT_EQ(f(i, 2), 1.0);
    EXPECT_EQ(f(i, 3), 0.0);
  }
}

// Direct evaluation over all point pairs.
double energy_oracle(const Mat& f, const NeighborGraph& g, const std::vector<int>& labels,
                     double mu) {
  const int n = static_cast<int>(f.rows());
  double data = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec mean = Vec::Zero(f.cols());
    int count = 0;
    for (int j = 0; j < n; ++j) {
      if (labels[j] == labels[i]) {
        mean += f.row(j).transpose();
        ++count;
      }
    }
    mean /= count;
    data += (mean - f.row(i).transpose()).squaredNorm();
  }
  auto linked = [&](int i, int j) {
    for (const auto& nb : g.knn[i]) {
      if (nb.index == j) return true;
    }
    for (const auto& nb : g.knn[j]) {
      if (nb.index == i) return true;
    }
    return false;
  };
  // Mean undirected edge length.
  double sum = 0.0;
  int edges = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!linked(i, j)) continue;
      double d = -1.0;
      for (const auto& nb : g.knn[i]) {
        if (nb.index == j) d = nb.distance;
      }
      for (const auto& nb : g.knn[j]) {
        if (nb.index == i) d = nb.distance;
      }
      sum += d;
      ++edges;
    }
  }
  const double mean_len = sum / edges;
  double pair = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!linked(i, j) || labels[i] == labels[j]) continue;
      double d = 0.0;
      for (const auto& nb : g.knn[i]) {
        if (nb.index == j) d = nb.distance;
      }
      for (const auto& nb : g.knn[j]) {
        if (nb.index == i) d = nb.distance;
      }
      pair += 1.0 / (1.0 + d / mean_len);
    }
  }
  return data + mu * pair;
}

TEST(SegmentationEnergy, MatchesDoubleLoopOracle) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> lab(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    PointCloud c = random_cloud(10, rng);
    NeighborGraph g = build_knn_graph(c, 3);
    Mat f = compute_geometric_features(c, g);
    std::vector<int> labels(10);
    for (int& l : labels) l = lab(rng);
    EXPECT_NEAR(segmentation_energy(f, g, labels, 0.37), energy_oracle(f, g, labels, 0.37),
                1e-12);
  }
}

TEST(SegmentationEnergy, TrivialLabelings) {
  std::mt19937_64 rng(8);
  PointCloud c = random_cloud(30, rng);
  NeighborGraph g = build_knn_graph(c, 4);
  Mat constant = Mat::Constant(30, 4, 0.25);
  EXPECT_NEAR(segmentation_energy(constant, g, std::vector<int>(30, 0), 2.0), 0.0, 1e-15);
  Mat f = compute_geometric_features(c, g);
  std::vector<int> singletons(30);
  for (int i = 0; i < 30; ++i) singletons[i] = i;
  double wsum = 0.0;
  for (double w : edge_weights(g.edges())) wsum += w;
  EXPECT_NEAR(segmentation_energy(f, g, singletons, 0.5), 0.5 * wsum, 1e-12);
}

TEST(SegmentationEnergy, InvariantToLabelPermutation) {
  std::mt19937_64 rng(9);
  PointCloud c = random_cloud(40, rng);
  NeighborGraph g = build_knn_graph(c, 5);
  Mat f = compute_geometric_features(c, g);
  std::vector<int> labels(40), permuted(40);
  const int perm[4] = {2, 0, 3, 1};
  for (int i = 0; i < 40; ++i) {
    labels[i] = i % 4;
    permuted[i] = perm[labels[i]];
  }
  EXPECT_DOUBLE_EQ(segmentation_energy(f, g, labels, 0.2),
                   segmentation_energy(f, g, permuted, 0.2));
}

TEST(Potts, TwoHomogeneousClusters) {
  std::mt19937_64 rng(12);
  PointCloud c;
  c.points.resize(40, 3);
  c.points.topRows(20) = testing::random_points(20, rng, 0.1);
  c.points.bottomRows(20) = testing::random_points(20, rng, 0.1);
  c.points.bottomRows(20).col(0).array() += 10.0;
  NeighborGraph g = build_knn_graph(c, 4);
  Mat f(40, 4);
  f.topRows(20).rowwise() = Eigen::RowVector4d(1, 0, 0, 0);
  f.bottomRows(20).rowwise() = Eigen::RowVector4d(0, 1, 0, 1);
  PottsOptions opt;
  opt.mu = 5.0;
  Segmentation s = potts_segmentation(f, g, opt);
  EXPECT_EQ(s.num_segments, 2);
  EXPECT_NEAR(s.energy, 0.0, 1e-12);
  for (int i = 1; i < 20; ++i) EXPECT_EQ(s.labels[i], s.labels[0]);
  for (int i = 21; i < 40; ++i) EXPECT_EQ(s.labels[i], s.labels[20]);
  EXPECT_NE(s.labels[0], s.labels[20]);
}

TEST(Potts, ConstantFeaturesGiveOneSegment) {
  std::mt19937_64 rng(13);
  PointCloud c = random_cloud(50, rng);
  NeighborGraph g = build_knn_graph(c, 6);
  Segmentation s = potts_segmentation(Mat::Constant(50, 4, 0.3), g, PottsOptions{0.01, 1, {}});
  EXPECT_EQ(s.num_segments, 1);
  EXPECT_NEAR(s.energy, 0.0, 1e-12);
}

TEST(Potts, BeatsTrivialLabelingsOnSmallInstance) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    PointCloud c = random_cloud(16, rng);
    NeighborGraph g = build_knn_graph(c, 3);
    Mat f = compute_geometric_features(c, g);
    Segmentation s = potts_segmentation(f, g, PottsOptions{0.1, 1, {}});
    std::vector<int> one(16, 0), each(16);
    for (int i = 0; i < 16; ++i) each[i] = i;
    EXPECT_LE(s.energy, segmentation_energy(f, g, one, 0.1) + 1e-12);
    EXPECT_LE(s.energy, segmentation_energy(f, g, each, 0.1) + 1e-12);
  }
}

TEST(Potts, TraceIsMonotoneAndExact) {
  std::mt19937_64 rng(15);
  PointCloud c = random_cloud(120, rng);
  NeighborGraph g = build_knn_graph(c, 8);
  Mat f = compute_geometric_features(c, g);
  std::vector<double> audited;
  PottsOptions opt{0.05, 1, {}};
  opt.observer = [&](std::span<const int> labels, double e) {
    EXPECT_NEAR(e, segmentation_energy(f, g, labels, opt.mu), 1e-9);
    audited.push_back(e);
  };
  Segmentation s = potts_segmentation(f, g, opt);
  ASSERT_EQ(audited.size(), s.energy_trace.size());
  for (std::size_t i = 1; i < s.energy_trace.size(); ++i) {
    EXPECT_LE(s.energy_trace[i], s.energy_trace[i - 1] + 1e-12);
  }
  EXPECT_NEAR(s.energy, segmentation_energy(f, g, s.labels, opt.mu), 1e-12);
  // Compacted labels in order of first occurrence.
  int next = 0;
  for (int l : s.labels) {
    ASSERT_LE(l, next);
    if (l == next) ++next;
  }
  EXPECT_EQ(next, s.num_segments);
}

TEST(Potts, RespectsSegmentFloor) {
  std::mt19937_64 rng(16);
  PointCloud c = random_cloud(60, rng);
  NeighborGraph g = build_knn_graph(c, 6);
  Mat f = compute_geometric_features(c, g);
  Segmentation s = potts_segmentation(f, g, PottsOptions{100.0, 5, {}});
  EXPECT_EQ(s.num_segments, 5);
}

TEST(Fps, AllPointsWhenLEqualsN) {
  std::mt19937_64 rng(17);
  PointCloud c = random_cloud(12, rng);
  FpsResult r = fps_sample(c, 12);
  std::vector<int> idx = r.indices;
  std::sort(idx.begin(), idx.end());
  for (int i = 0; i < 12; ++i) EXPECT_EQ(idx[i], i);
}

TEST(Fps, SquareCornersPickDiagonal) {
  PointCloud c;
  c.points.resize(4, 3);
  c.points << 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0;
  c.labels = {5, 6, 7, 8};
  FpsResult r = fps_sample(c, 2);
  ASSERT_EQ(r.indices.size(), 2u);
  EXPECT_EQ(r.indices[0], 0);
  EXPECT_EQ(r.indices[1], 2);
  EXPECT_EQ(r.labels, (std::vector<int>{5, 7}));
}

double min_pairwise(const Points& p, const std::vector<int>& idx) {
  double best = 1e300;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      best = std::min(best, (p.row(idx[a]) - p.row(idx[b])).norm());
    }
  }
  return best;
}

TEST(Fps, SpreadBeatsRandomSubsets) {
  std::mt19937_64 rng(18);
  PointCloud c = random_cloud(128, rng);
  FpsResult r = fps_sample(c, 16);
  const double fps = min_pairwise(c.points, r.indices);
  std::vector<int> all(128);
  for (int i = 0; i < 128; ++i) all[i] = i;
  for (int t = 0; t < 1000; ++t) {
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<int> subset(all.begin(), all.begin() + 16);
    ASSERT_GE(fps, min_pairwise(c.points, subset));
  }
}

TEST(Fps, DeterministicAndValidated) {
  std::mt19937_64 rng(19);
  PointCloud c = random_cloud(50, rng);
  EXPECT_EQ(fps_sample(c, 10).indices, fps_sample(c, 10).indices);
  EXPECT_THROW(fps_sample(c, 51), InvalidArgument);
}

}  // namespace
}  // namespace pgac

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
#include <cstdio>
#include <set>

#include <gtest/gtest.h>

#include "pgac/data.hpp"
#include "pgac/transport.hpp"
#include "test_util.hpp"

namespace pgac {
namespace {

using testing::random_cloud;
using testing::random_points;

TEST(CostMatrix, SquaredEuclidean) {
  Points p(2, 3), c(1, 3);
  p << 1, 0, 0, 0, 0, 0;
  c << 0, 0, 0;
  Mat t = build_cost_matrix(p, c);
  EXPECT_DOUBLE_EQ(t(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(t(1, 0), 0.0);
}

TEST(CostMatrix, MatchesDoubleLoop) {
  std::mt19937_64 rng(1);
  Points p = random_points(8, rng), c = random_points(4, rng);
  Mat t = build_cost_matrix(p, c);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int d = 0; d < 3; ++d) s += (p(i, d) - c(j, d)) * (p(i, d) - c(j, d));
      EXPECT_NEAR(t(i, j), s, 1e-12);
    }
  }
}

TEST(LabelMask, Cases) {
  std::vector<int> same(5, 2), centers{2, 2};
  EXPECT_TRUE(build_label_mask(same, centers).all());
  std::vector<int> two{0, 0, 1, 1}, cl{0, 1};
  Mask m = build_label_mask(two, cl);
  EXPECT_TRUE(m(0, 0) && m(1, 0) && m(2, 1) && m(3, 1));
  EXPECT_FALSE(m(0, 1) || m(1, 1) || m(2, 0) || m(3, 0));
  std::vector<int> orphan{0, 5};
  try {
    build_label_mask(orphan, cl);
    FAIL() << "expected UnassignablePoint";
  } catch (const UnassignablePoint& e) {
    EXPECT_EQ(e.point(), 1);
    EXPECT_EQ(e.label(), 5);
  }
}

TEST(Sinkhorn, TwoByTwoIdentityCost) {
  TransportProblem p;
  p.cost.resize(2, 2);
  p.cost << 0, 1, 1, 0;
  p.mask = Mask::Constant(2, 2, true);
  p.epsilon = 0.01;
  TransportPlan q = sinkhorn_masked(p);
  EXPECT_GE(q.plan(0, 0), 0.99);
  EXPECT_GE(q.plan(1, 1), 0.99);
  // Fixed point: by symmetry q00 = q11 = 1/(1+e^{-1/eps}).
  EXPECT_NEAR(q.plan(0, 0), 1.0 / (1.0 + std::exp(-100.0)), 1e-12);
}

TEST(Sinkhorn, EqualCostsGiveUniformPlan) {
  TransportProblem p;
  p.cost = Mat::Constant(12, 3, 0.7);
  p.mask = Mask::Constant(12, 3, true);
  TransportPlan q = sinkhorn_masked(p);
  EXPECT_TRUE(q.converged);
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(q.plan(i, j), 1.0 / 3.0, 1e-12);
  }
}

TEST(Sinkhorn, BlockMaskIsExactlyZeroOffBlock) {
  std::mt19937_64 rng(2);
  Points pts = random_points(20, rng), centers = random_points(4, rng);
  std::vector<int> labels(20), cl{0, 0, 1, 1};
  for (int i = 0; i < 20; ++i) labels[i] = i < 10 ? 0 : 1;
  TransportProblem p;
  p.cost = build_cost_matrix(pts, centers);
  p.mask = build_label_mask(labels, cl);
  p.epsilon = default_epsilon(p.cost, p.mask);
  p.max_iters = 20000;
  TransportPlan q = sinkhorn_masked(p);
  EXPECT_TRUE(q.converged);
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (!p.mask(i, j)) {
        EXPECT_EQ(q.plan(i, j), 0.0);
      }
      EXPECT_GE(q.plan(i, j), 0.0);
    }
  }
  EXPECT_LE(q.row_error, 1e-12);
  EXPECT_LE(q.col_error, 1e-4);
}

TEST(Sinkhorn, SmallEpsilonStaysFinite) {
  std::mt19937_64 rng(3);
  Points pts = random_points(64, rng), centers = random_points(8, rng);
  TransportProblem p;
  p.cost = build_cost_matrix(pts, centers);
  p.mask = Mask::Constant(64, 8, true);
  p.epsilon = 1e-4;
  p.max_iters = 2000;
  TransportPlan q = sinkhorn_masked(p);
  EXPECT_TRUE(q.plan.allFinite());
  EXPECT_LE(q.row_error, 1e-9);
}

TEST(Sinkhorn, ReportsNonConvergence) {
  std::mt19937_64 rng(4);
  Points pts = random_points(30, rng), centers = random_points(5, rng);
  TransportProblem p;
  p.cost = build_cost_matrix(pts, centers);
  p.mask = Mask::Constant(30, 5, true);
  p.epsilon = 1e-3;
  p.max_iters = 1;
  TransportPlan q = sinkhorn_masked(p);
  EXPECT_FALSE(q.converged);
  EXPECT_EQ(q.iterations, 1);
}

TEST(Sinkhorn, RejectsBadProblems) {
  TransportProblem p;
  p.cost = Mat::Zero(2, 2);
  p.mask = Mask::Constant(2, 2, true);
  p.mask(0, 0) = p.mask(0, 1) = false;
  EXPECT_THROW(sinkhorn_masked(p), InvalidArgument);
  p.mask = Mask::Constant(2, 2, true);
  p.epsilon = 0.0;
  EXPECT_THROW(sinkhorn_masked(p), InvalidArgument);
}

TEST(ExtractPatches, UniformPlanTieBreakAndRepair) {
  std::mt19937_64 rng(5);
  PointCloud c = random_cloud(9, rng);
  Points centers = c.points.topRows(3);
  Mat q = Mat::Constant(9, 3, 1.0 / 3.0);
  Mask m = Mask::Constant(9, 3, true);
  std::vector<int> cl{0, 0, 0};
  c.labels.assign(9, 0);
  PatchSet ps = extract_patches(q, m, c, centers, cl);
  check_partition(ps);
  // Ties go to patch 0; the repair moves one point into each empty patch.
  EXPECT_EQ(ps.patch_points[0].size(), 7u);
  EXPECT_EQ(ps.patch_points[1].size(), 1u);
  EXPECT_EQ(ps.patch_points[2].size(), 1u);
}

TEST(ExtractPatches, TwoSegmentsArePure) {
  std::mt19937_64 rng(6);
  PointCloud c = random_cloud(64, rng);
  c.labels.resize(64);
  for (int i = 0; i < 64; ++i) c.labels[i] = c.points(i, 0) > 0.0 ? 1 : 0;
  FpsResult fps = fps_sample(c, 6);
  std::set<int> seen(fps.labels.begin(), fps.labels.end());
  ASSERT_EQ(seen.size(), 2u);
  Points centers(6, 3);
  for (int j = 0; j < 6; ++j) centers.row(j) = c.points.row(fps.indices[j]);
  TransportProblem p;
  p.cost = build_cost_matrix(c.points, centers);
  p.mask = build_label_mask(c.labels, fps.labels);
  p.epsilon = default_epsilon(p.cost, p.mask);
  PatchSet ps = extract_patches(sinkhorn_masked(p).plan, p.mask, c, centers, fps.labels);
  check_partition(ps);
  for (int i = 0; i < 64; ++i) EXPECT_TRUE(p.mask(i, ps.patch_of[i]));
}

TEST(CheckPartition, DetectsViolations) {
  PatchSet ps;
  ps.centers = Points::Zero(2, 3);
  ps.center_labels = {0, 1};
  ps.patch_of = {0, 1, 1};
  ps.patch_points = {{0}, {1, 2}};
  ps.point_labels = {0, 1, 1};
  EXPECT_NO_THROW(check_partition(ps));
  ps.point_labels = {0, 1, 0};
  EXPECT_THROW(check_partition(ps), InvalidArgument);
  ps.point_labels.clear();
  ps.patch_points = {{0, 1}, {1, 2}};
  EXPECT_THROW(check_partition(ps), InvalidArgument);
  ps.patch_points = {{}, {0, 1, 2}};
  EXPECT_THROW(check_partition(ps), InvalidArgument);
}

TEST(KnnGrouping, WholeCloudPatches) {
  std::mt19937_64 rng(7);
  PointCloud c = random_cloud(20, rng);
  PatchSet ps = knn_grouping(c, 3, 20);
  EXPECT_TRUE(ps.overlapping);
  for (const auto& p : ps.patch_points) EXPECT_EQ(p.size(), 20u);
}

TEST(KnnGrouping, RecoversSeparatedClusters) {
  std::mt19937_64 rng(8);
  PointCloud c;
  c.points.resize(30, 3);
  c.points.topRows(15) = random_points(15, rng, 0.1);
  c.points.bottomRows(15) = random_points(15, rng, 0.1);
  c.points.bottomRows(15).col(1).array() += 5.0;
  PatchSet ps = knn_grouping(c, 2, 15);
  std::set<std::set<int>> got;
  for (const auto& p : ps.patch_points) got.insert(std::set<int>(p.begin(), p.end()));
  std::set<int> a, b;
  for (int i = 0; i < 15; ++i) {
    a.insert(i);
    b.insert(i + 15);
  }
  EXPECT_TRUE(got.count(a) && got.count(b));
}

TEST(KnnGrouping, MembersAreTrueNearest) {
  std::mt19937_64 rng(9);
  PointCloud c = random_cloud(128, rng);
  PatchSet ps = knn_grouping(c, 8, 12);
  for (int j = 0; j < 8; ++j) {
    std::vector<std::pair<double, int>> all;
    for (int i = 0; i < 128; ++i) all.push_back({(c.points.row(i) - ps.centers.row(j)).norm(), i});
    std::sort(all.begin(), all.end());
    std::set<int> want;
    for (int r = 0; r < 12; ++r) want.insert(all[r].second);
    EXPECT_EQ(std::set<int>(ps.patch_points[j].begin(), ps.patch_points[j].end()), want);
  }
}

TEST(PartitionPipeline, SpherePlaneCompositeIsPure) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud c;
  c.points.resize(256, 3);
  for (int i = 0; i < 128; ++i) {
    Vec3 v(g(rng), g(rng), g(rng));
    c.points.row(i) = (0.5 * v.normalized()).transpose();
  }
  for (int i = 128; i < 256; ++i) c.points.row(i) << u(rng), u(rng), -1.5;
  PartitionConfig cfg;
  PatchSet ps = partition_pipeline(c, 8, cfg);
  check_partition(ps);
  // The segmentation never joins the sphere and the detached plane, so no
  // patch mixes them.
  for (const auto& patch : ps.patch_points) {
    const bool sphere = patch.front() < 128;
    for (int i : patch) EXPECT_EQ(i < 128, sphere);
  }
}

TEST(PartitionPipeline, SingletonPatchesWhenLEqualsN) {
  std::mt19937_64 rng(11);
  PointCloud c = random_cloud(24, rng);
  c.labels.assign(24, 0);
  PatchSet ps = partition_pipeline(c, 24, PartitionConfig{});
  check_partition(ps);
  for (const auto& p : ps.patch_points) EXPECT_EQ(p.size(), 1u);
}

TEST(PartitionPipeline, DeterministicAndBalanced) {
  SyntheticShapeSpec spec;
  spec.shape = ShapeClass::kBox;
  spec.seed = 3;
  PointCloud c = generate_shape(spec);
  PartitionConfig cfg;
  PatchSet a = partition_pipeline(c, 32, cfg), b = partition_pipeline(c, 32, cfg);
  EXPECT_EQ(a.patch_of, b.patch_of);
  check_partition(a);
  std::size_t lo = c.size(), hi = 0;
  for (const auto& p : a.patch_points) {
    lo = std::min(lo, p.size());
    hi = std::max(hi, p.size());
  }
  // Soft balance property; logged only.
  std::printf("patch sizes min %zu max %zu\n", lo, hi);
}

TEST(PartitionPipeline, KnnBaseline) {
  std::mt19937_64 rng(12);
  PointCloud c = random_cloud(64, rng);
  PartitionConfig cfg;
  cfg.grouping = Grouping::kKnn;
  PatchSet ps = partition_pipeline(c, 8, cfg);
  EXPECT_TRUE(ps.overlapping);
  for (const auto& p : ps.patch_points) EXPECT_EQ(p.size(), 16u);
}

}  // namespace
}  // namespace pgac

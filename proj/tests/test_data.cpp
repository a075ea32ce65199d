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

#include <cmath>
#include <filesystem>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "pgac/config.hpp"
#include "pgac/data.hpp"
#include "pgac/io.hpp"
#include "test_util.hpp"

namespace pgac {
namespace {

namespace fs = std::filesystem;

TEST(CloudIo, RoundTripIsExact) {
  std::mt19937_64 rng(1);
  PointCloud c = testing::random_cloud(50, rng);
  c.points(3, 1) = 1.0 / 3.0;
  EXPECT_EQ(parse_cloud(format_cloud(c)).points, c.points);
  c.labels.resize(50);
  for (int i = 0; i < 50; ++i) c.labels[i] = i % 7;
  const std::string path = testing::scratch_dir("io") + "/c.xyz";
  save_cloud(path, c);
  PointCloud back = load_cloud(path);
  EXPECT_EQ(back.points, c.points);
  EXPECT_EQ(back.labels, c.labels);
}

TEST(CloudIo, CommentsAndBlankLines) {
  PointCloud c = parse_cloud("# header\n\n1 2 3  # trailing\n  4 5 6\n");
  ASSERT_EQ(c.size(), 2);
  EXPECT_EQ(c.points(1, 2), 6.0);
  EXPECT_FALSE(c.has_labels());
}

TEST(CloudIo, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) {
    try {
      parse_cloud(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  EXPECT_EQ(line_of("1 2 3\n# c\n4 5\n"), 3);
  EXPECT_EQ(line_of("1 2 3\n4 x 6\n"), 2);
  EXPECT_EQ(line_of("1 2 3 0\n4 5 6\n"), 2);
  EXPECT_EQ(line_of("1 2 3 -1\n"), 1);
  EXPECT_EQ(line_of("1 2 nan\n"), 1);
  EXPECT_THROW(parse_cloud("# nothing\n"), ParseError);
  EXPECT_THROW(load_cloud("/nonexistent/cloud.xyz"), std::exception);
}

TEST(Config, CanonicalRoundTrip) {
  RunConfig c = RunConfig::desk();
  c.seed = 77;
  c.partition.mu = 0.125;
  c.codebook.maintenance = MaintenanceMode::kRandom;
  c.partition.grouping = Grouping::kKnn;
  RunConfig back = parse_config(c.canonical());
  EXPECT_EQ(back.canonical(), c.canonical());
  EXPECT_EQ(back.digest(), c.digest());
  EXPECT_NE(RunConfig::desk().digest(), c.digest());
}

TEST(Config, SectionsCommentsAndPresets) {
  RunConfig c = parse_config(
      "# comment\n[run]\npreset = micro\nseed = 5\n\n[train]\nepochs = 3  # short\n"
      "[codebook]\nmaintenance = off\n");
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.train.epochs, 3);
  EXPECT_EQ(c.model.dim, RunConfig::micro().model.dim);
  EXPECT_EQ(c.codebook.maintenance, MaintenanceMode::kOff);
}

TEST(Config, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  EXPECT_EQ(line_of("[train]\nepochs = 3\nbogus line\n"), 3);
  EXPECT_EQ(line_of("[train\n"), 1);
  EXPECT_EQ(line_of("\n[train]\nno_such_key = 1\n"), 3);
  EXPECT_EQ(line_of("[train]\nepochs = many\n"), 2);
}

TEST(Config, ValidateRejectsBadValues) {
  RunConfig c;
  c.train.mask_ratio = 1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = RunConfig{};
  c.model.heads = 5;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_NO_THROW(RunConfig::full().validate());
  EXPECT_NO_THROW(RunConfig::micro().validate());
}

TEST(Shapes, DeterministicInSeed) {
  SyntheticShapeSpec s;
  s.seed = 9;
  s.shape = ShapeClass::kCylinder;
  EXPECT_EQ(generate_shape(s).points, generate_shape(s).points);
  SyntheticShapeSpec t = s;
  t.seed = 10;
  EXPECT_NE(generate_shape(s).points, generate_shape(t).points);
}

TEST(Shapes, UnitSphereHasConstantRadius) {
  SyntheticShapeSpec s;
  s.shape = ShapeClass::kSphere;
  s.jitter = 0.0;
  s.scale_min = s.scale_max = 1.0;
  s.seed = 3;
  PointCloud c = generate_shape(s);
  Vec norms = c.points.rowwise().norm();
  EXPECT_NEAR(norms.minCoeff(), 1.0, 1e-12);
  EXPECT_NEAR(norms.maxCoeff(), 1.0, 1e-12);
  EXPECT_LE(c.points.colwise().mean().norm(), 0.1);
}

TEST(Shapes, NormalizedIntoUnitBall) {
  for (int k = 0; k < kNumShapeClasses; ++k) {
    SyntheticShapeSpec s;
    s.shape = static_cast<ShapeClass>(k);
    s.seed = 100 + k;
    PointCloud c = generate_shape(s);
    EXPECT_EQ(c.size(), 512);
    EXPECT_NEAR(c.points.rowwise().norm().maxCoeff(), 1.0, 1e-12) << to_string(s.shape);
  }
}

TEST(Shapes, BoxFacesSampledByArea) {
  SyntheticShapeSpec s;
  s.shape = ShapeClass::kBox;
  s.jitter = 0.0;
  s.random_pose = false;
  s.n_points = 4096;
  s.seed = 11;
  PointCloud c = generate_shape(s);
  const Eigen::RowVector3d ext = c.points.cwiseAbs().colwise().maxCoeff();
  Eigen::Vector3d hits = Eigen::Vector3d::Zero();
  for (int i = 0; i < c.size(); ++i) {
    for (int d = 0; d < 3; ++d) {
      if (std::abs(std::abs(c.points(i, d)) - ext(d)) < 1e-12) {
        hits(d) += 1.0;
        break;
      }
    }
  }
  EXPECT_EQ(hits.sum(), 4096.0);
  const Eigen::Vector3d area(ext(1) * ext(2), ext(0) * ext(2), ext(0) * ext(1));
  for (int d = 0; d < 3; ++d) {
    const double want = area(d) / area.sum(), got = hits(d) / 4096.0;
    EXPECT_NEAR(got / want, 1.0, 0.05) << "axis " << d;
  }
}

TEST(Shapes, PlanePairLiesOnTwoPlanes) {
  SyntheticShapeSpec s;
  s.shape = ShapeClass::kPlanePair;
  s.jitter = 0.0;
  s.random_pose = false;
  s.seed = 12;
  PointCloud c = generate_shape(s);
  int on_first = 0;
  for (int i = 0; i < c.size(); ++i) on_first += c.points(i, 2) == 0.0;
  EXPECT_GT(on_first, 150);
  EXPECT_LT(on_first, 362);
}

TEST(Dataset, SizesClassesAndStratifiedSplit) {
  RunConfig cfg = RunConfig::desk();
  cfg.data.points = 64;
  Dataset d = build_dataset(cfg);
  EXPECT_EQ(d.clouds.size(), 800u);
  EXPECT_EQ(d.train.size(), 640u);
  EXPECT_EQ(d.val.size(), 160u);
  int per_class[4] = {0, 0, 0, 0};
  for (int i : d.val) ++per_class[d.entries[i].class_id];
  for (int c = 0; c < 4; ++c) EXPECT_EQ(per_class[c], 40);
  std::set<int> all(d.train.begin(), d.train.end());
  all.insert(d.val.begin(), d.val.end());
  EXPECT_EQ(all.size(), 800u);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(d.entries[i].class_id, i % 4);
  EXPECT_EQ(build_dataset(cfg).digest(), d.digest());
  cfg.seed = 2;
  EXPECT_NE(build_dataset(cfg).digest(), d.digest());
}

TEST(Manifest, RoundTripAndErrors) {
  std::vector<DatasetEntry> e(2);
  e[0].path = "a.xyz";
  e[0].class_id = 1;
  e[1].path = "b.xyz";
  e[1].class_id = 3;
  e[1].cache_path = "labels/x.xyz";
  std::vector<DatasetEntry> back = parse_manifest(format_manifest(e));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].cache_path, "");
  EXPECT_EQ(back[1].cache_path, "labels/x.xyz");
  EXPECT_EQ(back[1].class_id, 3);
  try {
    parse_manifest("a.xyz 1 -\nb.xyz\n");
    FAIL();
  } catch (const ParseError& err) {
    EXPECT_EQ(err.line(), 2);
  }
}

TEST(LabelCache, HitsAndInvalidation) {
  const std::string dir = testing::scratch_dir("labels");
  SyntheticShapeSpec s;
  s.n_points = 128;
  s.seed = 4;
  PointCloud c = generate_shape(s);
  LabelCache a(dir);
  std::vector<int> l1 = a.labels(c, 8, 0.06, 1);
  std::vector<int> l2 = a.labels(c, 8, 0.06, 1);
  EXPECT_EQ(l1, l2);
  EXPECT_EQ(a.computed(), 1);
  // A fresh cache over the same directory reads the file.
  LabelCache b(dir);
  EXPECT_EQ(b.labels(c, 8, 0.06, 1), l1);
  EXPECT_EQ(b.computed(), 0);
  EXPECT_TRUE(fs::exists(b.path_for(LabelCache::key(c, 8, 0.06, 1))));
  // Any change to the inputs is a different key.
  b.labels(c, 8, 0.07, 1);
  EXPECT_EQ(b.computed(), 1);
  PointCloud moved = c;
  moved.points(0, 0) += 1e-9;
  EXPECT_NE(LabelCache::key(moved, 8, 0.06, 1), LabelCache::key(c, 8, 0.06, 1));
  EXPECT_NE(LabelCache::key(c, 9, 0.06, 1), LabelCache::key(c, 8, 0.06, 1));
}

TEST(Dataset, CacheDirWritesClouds) {
  RunConfig cfg = RunConfig::micro();
  cfg.data.cache_dir = testing::scratch_dir("ds");
  Dataset d = build_dataset(cfg);
  ASSERT_FALSE(d.entries.empty());
  EXPECT_TRUE(fs::exists(d.entries[0].path));
  EXPECT_EQ(load_cloud(d.entries[0].path).points, d.clouds[0].points);
  EXPECT_TRUE(fs::exists(fs::path(d.entries[0].path).parent_path() / "manifest.txt"));
}

}  // namespace
}  // namespace pgac

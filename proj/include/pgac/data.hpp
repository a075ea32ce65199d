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

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "pgac/common.hpp"
#include "pgac/config.hpp"

namespace pgac {

enum class ShapeClass { kSphere = 0, kBox = 1, kCylinder = 2, kPlanePair = 3 };

inline constexpr int kNumShapeClasses = 4;
std::string to_string(ShapeClass c);

struct SyntheticShapeSpec {
  ShapeClass shape = ShapeClass::kSphere;
  int n_points = 512;
  double jitter = 0.01;
  // Per-axis stretch drawn uniformly from [scale_min, scale_max].
  double scale_min = 0.6;
  double scale_max = 1.4;
  bool random_pose = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// Surface samples of the shape in its own frame (centered at the origin),
// stretched, jittered, rotated, then divided by the largest distance to the
// origin. Deterministic in the spec.
PointCloud generate_shape(const SyntheticShapeSpec& spec);

struct DatasetEntry {
  std::string path;  // empty for in-memory clouds
  int class_id = 0;
  std::string cache_path;  // empty when labels are not cached on disk
  SyntheticShapeSpec spec;
};

struct Dataset {
  std::vector<DatasetEntry> entries;
  std::vector<PointCloud> clouds;
  std::vector<int> train;  // indices into entries
  std::vector<int> val;
  int num_classes = 0;

  // Digest over entries, classes, split and coordinates.
  std::string digest() const;
};

// classes × clouds_per_class synthetic clouds, class of entry i is
// i % classes. The validation split takes round(val_fraction · count) clouds
// of each class, drawn with the seed. When data.cache_dir is set the clouds
// and a manifest are written there.
Dataset build_dataset(const RunConfig& config);

// `path class_id cache_path` per line; `-` marks an empty cache path.
std::string format_manifest(const std::vector<DatasetEntry>& entries);
std::vector<DatasetEntry> parse_manifest(const std::string& text);

// Segmentation labels keyed by (cloud digest, μ, k, min_segments, feature
// version). Backed by memory and, when a directory is given, by label files
// in the point cloud format.
class LabelCache {
 public:
  explicit LabelCache(std::string dir = "") : dir_(std::move(dir)) {}

  std::vector<int> labels(const PointCloud& cloud, int k, double mu,
                          int min_segments);
  static std::string key(const PointCloud& cloud, int k, double mu,
                         int min_segments);
  std::string path_for(const std::string& key) const;

  // Number of segmentations actually computed (cache misses).
  long computed() const { return computed_.load(); }

 private:
  std::string dir_;
  std::mutex mu_;
  std::map<std::string, std::vector<int>> memory_;
  std::atomic<long> computed_{0};
};

std::string cloud_digest(const PointCloud& cloud);

}  // namespace pgac

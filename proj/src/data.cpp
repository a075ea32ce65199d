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

#include "pgac/data.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>

#include "pgac/io.hpp"
#include "pgac/transport.hpp"

namespace pgac {

namespace fs = std::filesystem;

std::string to_string(ShapeClass c) {
  switch (c) {
    case ShapeClass::kSphere: return "sphere";
    case ShapeClass::kBox: return "box";
    case ShapeClass::kCylinder: return "cylinder";
    case ShapeClass::kPlanePair: return "plane-pair";
  }
  return "unknown";
}

void SyntheticShapeSpec::validate() const {
  require(n_points >= 64, "shape: n_points must be >= 64");
  require(jitter >= 0.0, "shape: jitter must be >= 0");
  require(scale_min > 0.0 && scale_min <= scale_max, "shape: need 0 < scale_min <= scale_max");
}

namespace {

using Rng = std::mt19937_64;

Vec3 sample_box(const Vec3& half, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), pick(0.0, 1.0);
  const double axy = half.x() * half.y(), axz = half.x() * half.z(), ayz = half.y() * half.z();
  const double r = pick(rng) * (axy + axz + ayz);
  const double sign = pick(rng) < 0.5 ? -1.0 : 1.0;
  const double a = u(rng), b = u(rng);
  if (r < ayz) return {sign * half.x(), a * half.y(), b * half.z()};
  if (r < ayz + axz) return {a * half.x(), sign * half.y(), b * half.z()};
  return {a * half.x(), b * half.y(), sign * half.z()};
}

Vec3 sample_cylinder(const Vec3& s, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double rbar = 0.5 * (s.x() + s.y());
  const double side = 2.0 * std::numbers::pi * rbar * 2.0 * s.z();
  const double caps = 2.0 * std::numbers::pi * s.x() * s.y();
  const double theta = 2.0 * std::numbers::pi * u(rng);
  if (u(rng) * (side + caps) < side) {
    return {s.x() * std::cos(theta), s.y() * std::sin(theta), s.z() * (2.0 * u(rng) - 1.0)};
  }
  const double rad = std::sqrt(u(rng));
  const double z = u(rng) < 0.5 ? -s.z() : s.z();
  return {s.x() * rad * std::cos(theta), s.y() * rad * std::sin(theta), z};
}

Vec3 sample_sphere(const Vec3& s, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-12);
  return v.normalized().cwiseProduct(s);
}

Vec3 sample_plane_pair(const Vec3& s, double angle, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), pick(0.0, 1.0);
  const double a = u(rng), b = u(rng);
  if (pick(rng) < 0.5) return {a * s.x(), b * s.y(), 0.0};
  return {a * s.x(), b * s.z() * std::cos(angle), b * s.z() * std::sin(angle)};
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

PointCloud generate_shape(const SyntheticShapeSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> scale(spec.scale_min, spec.scale_max);
  const Vec3 s(scale(rng), scale(rng), scale(rng));
  std::uniform_real_distribution<double> angle_dist(50.0, 90.0);
  const double angle = angle_dist(rng) * std::numbers::pi / 180.0;

  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  if (spec.random_pose) {
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    rot = q.toRotationMatrix();
  }

  PointCloud cloud;
  cloud.points.resize(spec.n_points, 3);
  std::normal_distribution<double> jitter(0.0, spec.jitter > 0.0 ? spec.jitter : 1.0);
  for (int i = 0; i < spec.n_points; ++i) {
    Vec3 p;
    switch (spec.shape) {
      case ShapeClass::kSphere: p = sample_sphere(s, rng); break;
      case ShapeClass::kBox: p = sample_box(s, rng); break;
      case ShapeClass::kCylinder: p = sample_cylinder(s, rng); break;
      case ShapeClass::kPlanePair: p = sample_plane_pair(s, angle, rng); break;
    }
    if (spec.jitter > 0.0) p += Vec3(jitter(rng), jitter(rng), jitter(rng));
    cloud.points.row(i) = (rot * p).transpose();
  }
  const double radius = cloud.points.rowwise().norm().maxCoeff();
  if (radius > 0.0) cloud.points /= radius;
  return cloud;
}

std::string cloud_digest(const PointCloud& cloud) {
  Fnv1a h;
  const int n = cloud.size();
  h.update(&n, sizeof(n));
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) {
      const double v = cloud.points(i, d);
      h.update(&v, sizeof(v));
    }
  }
  return h.hex();
}

std::string Dataset::digest() const {
  Fnv1a h;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    h.update(std::to_string(entries[i].class_id) + ":" + cloud_digest(clouds[i]) + ";");
  }
  for (int t : train) h.update("t" + std::to_string(t));
  for (int v : val) h.update("v" + std::to_string(v));
  return h.hex();
}

Dataset build_dataset(const RunConfig& config) {
  const DataConfig& dc = config.data;
  Dataset ds;
  ds.num_classes = dc.classes;
  const int total = dc.classes * dc.clouds_per_class;
  ds.entries.resize(total);
  ds.clouds.resize(total);
  for (int i = 0; i < total; ++i) {
    DatasetEntry& e = ds.entries[i];
    e.class_id = i % dc.classes;
    e.spec.shape = static_cast<ShapeClass>(e.class_id);
    e.spec.n_points = dc.points;
    e.spec.jitter = dc.jitter;
    e.spec.scale_min = dc.scale_min;
    e.spec.scale_max = dc.scale_max;
    e.spec.seed = mix_seed(config.seed, static_cast<std::uint64_t>(i));
    ds.clouds[i] = generate_shape(e.spec);
  }

  Rng rng(mix_seed(config.seed, 0xDA7A5E7ULL));
  const int per_class_val =
      static_cast<int>(std::lround(dc.val_fraction * dc.clouds_per_class));
  std::vector<int> is_val(total, 0);
  for (int c = 0; c < dc.classes; ++c) {
    std::vector<int> members;
    for (int i = c; i < total; i += dc.classes) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    for (int v = 0; v < per_class_val && v < static_cast<int>(members.size()); ++v) {
      is_val[members[v]] = 1;
    }
  }
  for (int i = 0; i < total; ++i) (is_val[i] ? ds.val : ds.train).push_back(i);

  if (!dc.cache_dir.empty()) {
    const std::string dir = dc.cache_dir + "/datasets/" + ds.digest();
    for (int i = 0; i < total; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "/cloud_%05d.xyz", i);
      ds.entries[i].path = dir + name;
      ds.entries[i].cache_path =
          dc.cache_dir + "/labels/" +
          LabelCache::key(ds.clouds[i], config.partition.knn_k, config.partition.mu,
                          config.partition.min_segments) +
          ".xyz";
    }
    if (!fs::exists(dir + "/manifest.txt")) {
      for (int i = 0; i < total; ++i) save_cloud(ds.entries[i].path, ds.clouds[i]);
      write_file_atomic(dir + "/manifest.txt", format_manifest(ds.entries));
    }
  }
  return ds;
}

std::string format_manifest(const std::vector<DatasetEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += (e.path.empty() ? "-" : e.path) + " " + std::to_string(e.class_id) + " " +
           (e.cache_path.empty() ? "-" : e.cache_path) + "\n";
  }
  return out;
}

std::vector<DatasetEntry> parse_manifest(const std::string& text) {
  std::vector<DatasetEntry> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string path, cache, extra;
    int cls = 0;
    if (!(ls >> path)) continue;
    if (!(ls >> cls >> cache) || (ls >> extra)) {
      throw ParseError("expected 'path class_id cache_path'", lineno);
    }
    if (cls < 0) throw ParseError("negative class id", lineno);
    DatasetEntry e;
    e.path = path == "-" ? "" : path;
    e.class_id = cls;
    e.cache_path = cache == "-" ? "" : cache;
    out.push_back(std::move(e));
  }
  return out;
}

std::string LabelCache::key(const PointCloud& cloud, int k, double mu,
                            int min_segments) {
  Fnv1a h;
  h.update(cloud_digest(cloud));
  char buf[128];
  std::snprintf(buf, sizeof(buf), "|k=%d|mu=%.17g|min=%d|fv=%d", k, mu, min_segments,
                kFeatureVersion);
  h.update(std::string(buf));
  return h.hex();
}

std::string LabelCache::path_for(const std::string& key) const {
  return dir_.empty() ? "" : dir_ + "/labels/" + key + ".xyz";
}

std::vector<int> LabelCache::labels(const PointCloud& cloud, int k, double mu,
                                    int min_segments) {
  const std::string id = key(cloud, k, mu, min_segments);
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = memory_.find(id); it != memory_.end()) return it->second;
  }
  std::vector<int> labels;
  const std::string path = path_for(id);
  if (!path.empty() && fs::exists(path)) {
    PointCloud cached = load_cloud(path);
    if (cached.size() == cloud.size() && cached.has_labels()) labels = cached.labels;
  }
  if (labels.empty()) {
    labels = segment_cloud(cloud, k, mu, min_segments);
    ++computed_;
    if (!path.empty()) {
      PointCloud out = cloud;
      out.labels = labels;
      save_cloud(path, out);
    }
  }
  std::lock_guard<std::mutex> lock(mu_);
  memory_.emplace(id, labels);
  return labels;
}

}  // namespace pgac

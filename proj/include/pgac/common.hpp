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

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pgac {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
// N×3 coordinates, one point per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnassignablePoint : public std::runtime_error {
 public:
  UnassignablePoint(int point, int label)
      : std::runtime_error("point " + std::to_string(point) + " has label " +
                           std::to_string(label) +
                           " which matches no center"),
        point_(point),
        label_(label) {}
  int point() const { return point_; }
  int label() const { return label_; }

 private:
  int point_;
  int label_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                    : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Raised when a NaN or Inf shows up in a computation that requires finite
// values (tensor ops, training loss).
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotImplemented : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct PointCloud {
  Points points;
  // Empty, or one non-negative segment id per point.
  std::vector<int> labels;

  int size() const { return static_cast<int>(points.rows()); }
  bool has_labels() const { return !labels.empty(); }
  // 1 + max label, or 0 when unlabeled.
  int num_segments() const;
  // Throws InvalidArgument when the invariants do not hold.
  void validate() const;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

// FNV-1a, used for config and file digests. Stable across platforms.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 1099511628211ULL;
    }
  }
  void update(const std::string& s) { update(s.data(), s.size()); }
  std::uint64_t digest() const { return hash_; }
  std::string hex() const;

 private:
  std::uint64_t hash_ = 14695981039346656037ULL;
};

std::string to_hex(std::uint64_t v);

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must
// write only to their own slot; the first exception is rethrown.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace pgac

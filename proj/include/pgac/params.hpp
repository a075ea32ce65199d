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

#include <map>
#include <random>
#include <string>
#include <vector>

#include "pgac/autodiff.hpp"
#include "pgac/common.hpp"

namespace pgac {

// Named parameter blocks in a stable (lexicographic) order. The order is
// what checkpoints, optimizers and gradient checks iterate over.
class ParamSet {
 public:
  void set(const std::string& name, Mat value);
  const Mat& at(const std::string& name) const;
  Mat& at(const std::string& name);
  bool contains(const std::string& name) const {
    return blocks_.count(name) != 0;
  }
  std::vector<std::string> names() const;
  std::size_t num_blocks() const { return blocks_.size(); }
  std::size_t num_scalars() const;

  // Same names and shapes, all zeros.
  ParamSet zeros_like() const;
  // Blocks whose name starts with one of `prefixes`.
  ParamSet subset(const std::vector<std::string>& prefixes) const;

  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }
  auto begin() { return blocks_.begin(); }
  auto end() { return blocks_.end(); }

  bool operator==(const ParamSet& other) const;

 private:
  std::map<std::string, Mat> blocks_;
};

// Parameter blocks bound as leaves of one tape.
class BoundParams {
 public:
  BoundParams(ad::Tape& tape, const ParamSet& params, bool requires_grad);

  ad::Var operator()(const std::string& name) const;
  bool contains(const std::string& name) const {
    return vars_.count(name) != 0;
  }
  ad::Tape& tape() const { return *tape_; }
  // Gradients after Tape::backward, zero for blocks nothing flowed into.
  ParamSet gradients() const;

 private:
  ad::Tape* tape_;
  std::map<std::string, ad::Var> vars_;
};

// Weights drawn from N(0, std²), the usual small-std transformer
// convention.
Mat normal_matrix(Eigen::Index rows, Eigen::Index cols, double std,
                  std::mt19937_64& rng);

}  // namespace pgac

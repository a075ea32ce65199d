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

#include "pgac/params.hpp"

namespace pgac {

void ParamSet::set(const std::string& name, Mat value) {
  blocks_[name] = std::move(value);
}

const Mat& ParamSet::at(const std::string& name) const {
  auto it = blocks_.find(name);
  if (it == blocks_.end()) throw InvalidArgument("unknown parameter: " + name);
  return it->second;
}

Mat& ParamSet::at(const std::string& name) {
  auto it = blocks_.find(name);
  if (it == blocks_.end()) throw InvalidArgument("unknown parameter: " + name);
  return it->second;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(blocks_.size());
  for (const auto& [name, _] : blocks_) out.push_back(name);
  return out;
}

std::size_t ParamSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [_, m] : blocks_) n += static_cast<std::size_t>(m.size());
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& [name, m] : blocks_) {
    out.set(name, Mat::Zero(m.rows(), m.cols()));
  }
  return out;
}

ParamSet ParamSet::subset(const std::vector<std::string>& prefixes) const {
  ParamSet out;
  for (const auto& [name, m] : blocks_) {
    for (const auto& p : prefixes) {
      if (name.rfind(p, 0) == 0) {
        out.set(name, m);
        break;
      }
    }
  }
  return out;
}

bool ParamSet::operator==(const ParamSet& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  auto it = other.blocks_.begin();
  for (const auto& [name, m] : blocks_) {
    if (name != it->first) return false;
    if (m.rows() != it->second.rows() || m.cols() != it->second.cols()) {
      return false;
    }
    if (m != it->second) return false;
    ++it;
  }
  return true;
}

BoundParams::BoundParams(ad::Tape& tape, const ParamSet& params,
                         bool requires_grad)
    : tape_(&tape) {
  for (const auto& [name, m] : params) {
    vars_.emplace(name, requires_grad ? tape.parameter(m) : tape.constant(m));
  }
}

ad::Var BoundParams::operator()(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw InvalidArgument("unbound parameter: " + name);
  return it->second;
}

ParamSet BoundParams::gradients() const {
  ParamSet out;
  for (const auto& [name, v] : vars_) out.set(name, v.grad());
  return out;
}

Mat normal_matrix(Eigen::Index rows, Eigen::Index cols, double std,
                  std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std);
  Mat m(rows, cols);
  // Fill row by row so the draw order does not depend on storage order.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

}  // namespace pgac

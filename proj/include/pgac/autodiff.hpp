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

// Reverse-mode differentiation over dense 64-bit matrices.
//
// A Tape records every operation as a node holding its value and a backward
// rule. Vars are cheap handles into a tape. Gradients only flow into nodes
// that (transitively) depend on a parameter leaf; constants and everything
// computed purely from constants are skipped on the reverse pass.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pgac/common.hpp"

namespace pgac::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Mat& value() const;
  // Gradient accumulated by Tape::backward. Zero-shaped like value() when
  // nothing flowed into this node.
  const Mat& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value);
  Var parameter(Mat value);

  // Seeds d(out)/d(out) = 1 and runs every recorded backward rule in
  // reverse order. `out` must be 1×1.
  void backward(Var out);

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  Var record(Mat value, std::vector<int> parents, BackwardFn fn,
             const char* op);
  const Mat& value(int id) const { return nodes_[id].value; }
  const Mat& grad(int id) const { return nodes_[id].grad; }
  // Gradient slot for accumulation; allocated on first touch.
  Mat& grad_slot(int id);
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Throws NumericFault naming `op` when `m` holds NaN or Inf.
void check_finite(const Mat& m, const char* op);

// Primitive ops. Shape mismatches throw InvalidArgument.
Var matmul(Var a, Var b);
Var transpose(Var a);
// Row-major reshape: element (i, j) of the result is the (i*cols + j)-th
// element of `a` read row by row.
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
// a + row, with row (1×C) broadcast over all rows of a.
Var add_row(Var a, Var row);
// a ∘ row, with row (1×C) broadcast over all rows of a.
Var mul_row(Var a, Var row);
// x·sigmoid(x).
Var silu(Var a);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
// Per-row standardization to mean 0 and variance 1 (biased variance, eps
// inside the square root). Gain and bias are separate ops.
Var layer_normalize(Var a, double eps = 1e-6);
// Per-row division by the Euclidean norm (norm floored at eps).
Var l2_normalize_rows(Var a, double eps = 1e-12);
Var reduce_mean(Var a);
Var reduce_sum(Var a);
// Σ a∘weights, a 1×1 result; weights are constant.
Var weighted_sum(Var a, const Mat& weights);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
// Row r of the result is row index[r] of a; repeated indices allowed.
Var gather_rows(Var a, std::span<const int> index);
// Row g of the result is the elementwise max of rows groups[g] of a. Each
// group must be non-empty. Ties route the gradient to the first row listed.
Var segment_max(Var a, const std::vector<std::vector<int>>& groups);
// 1×C row repeated n times.
Var repeat_row(Var row, Eigen::Index n);

}  // namespace pgac::ad

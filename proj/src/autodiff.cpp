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

#include "pgac/autodiff.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace pgac::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;

std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_tape(Var a, Var b) {
  require(a.valid() && b.valid(), "op on an unbound Var");
  require(a.tape() == b.tape(), "Vars belong to different tapes");
}

void require_same_shape(Var a, Var b, const char* op) {
  require_same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " +
                          shape_str(a.value()) + " vs " +
                          shape_str(b.value()));
  }
}

void require_row(Var a, Var row, const char* op) {
  require_same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw InvalidArgument(std::string(op) + ": expected 1x" +
                          std::to_string(a.cols()) + " row, got " +
                          shape_str(row.value()));
  }
}

void accumulate(Tape& t, int id, const Mat& delta) {
  if (!t.requires_grad(id)) return;
  t.grad_slot(id) += delta;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const Mat& Var::value() const { return tape_->value(id_); }
const Mat& Var::grad() const { return tape_->grad_slot(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

void check_finite(const Mat& m, const char* op) {
  if (!m.allFinite()) {
    throw NumericFault(std::string("non-finite value produced by ") + op);
  }
}

Var Tape::constant(Mat value) {
  check_finite(value, "constant");
  nodes_.push_back(Node{std::move(value), Mat(), false, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(Mat value) {
  check_finite(value, "parameter");
  nodes_.push_back(Node{std::move(value), Mat(), true, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Mat value, std::vector<int> parents, BackwardFn fn,
                 const char* op) {
  check_finite(value, op);
  bool needs = false;
  for (int p : parents) needs = needs || nodes_[p].requires_grad;
  nodes_.push_back(
      Node{std::move(value), Mat(), needs, needs ? std::move(fn) : nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Mat& Tape::grad_slot(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Tape::backward(Var out) {
  require(out.tape() == this, "backward: Var from another tape");
  require(out.rows() == 1 && out.cols() == 1, "backward: output must be 1x1");
  grad_slot(out.id()).setConstant(1.0);
  for (int i = out.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, i);
  }
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw InvalidArgument("matmul: inner dimension mismatch " +
                          shape_str(a.value()) + " * " + shape_str(b.value()));
  }
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(
      a.value() * b.value(), {ia, ib},
      [ia, ib](Tape& t, int self) {
        const Mat& g = t.grad(self);
        if (t.requires_grad(ia)) t.grad_slot(ia).noalias() += g * t.value(ib).transpose();
        if (t.requires_grad(ib)) t.grad_slot(ib).noalias() += t.value(ia).transpose() * g;
      },
      "matmul");
}

Var transpose(Var a) {
  const int ia = a.id();
  return a.tape()->record(
      a.value().transpose(), {ia},
      [ia](Tape& t, int self) { accumulate(t, ia, t.grad(self).transpose()); },
      "transpose");
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) {
    throw InvalidArgument("reshape: cannot view " + shape_str(a.value()) +
                          " as " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
  const int ia = a.id();
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  RowMat src = a.value();
  Mat out = Eigen::Map<RowMat>(src.data(), rows, cols);
  return a.tape()->record(
      std::move(out), {ia},
      [ia, r0, c0](Tape& t, int self) {
        RowMat g = t.grad(self);
        accumulate(t, ia, Mat(Eigen::Map<RowMat>(g.data(), r0, c0)));
      },
      "reshape");
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(
      a.value() + b.value(), {ia, ib},
      [ia, ib](Tape& t, int self) {
        accumulate(t, ia, t.grad(self));
        accumulate(t, ib, t.grad(self));
      },
      "add");
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(
      a.value() - b.value(), {ia, ib},
      [ia, ib](Tape& t, int self) {
        accumulate(t, ia, t.grad(self));
        accumulate(t, ib, -t.grad(self));
      },
      "sub");
}

Var hadamard(Var a, Var b) {
  require_same_shape(a, b, "hadamard");
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(
      a.value().cwiseProduct(b.value()), {ia, ib},
      [ia, ib](Tape& t, int self) {
        const Mat& g = t.grad(self);
        accumulate(t, ia, g.cwiseProduct(t.value(ib)));
        accumulate(t, ib, g.cwiseProduct(t.value(ia)));
      },
      "hadamard");
}

Var scale(Var a, double s) {
  const int ia = a.id();
  return a.tape()->record(
      a.value() * s, {ia},
      [ia, s](Tape& t, int self) { accumulate(t, ia, t.grad(self) * s); },
      "scale");
}

Var add_row(Var a, Var row) {
  require_row(a, row, "add_row");
  const int ia = a.id(), ir = row.id();
  Mat out = a.value().rowwise() + row.value().row(0);
  return a.tape()->record(
      std::move(out), {ia, ir},
      [ia, ir](Tape& t, int self) {
        const Mat& g = t.grad(self);
        accumulate(t, ia, g);
        accumulate(t, ir, g.colwise().sum());
      },
      "add_row");
}

Var mul_row(Var a, Var row) {
  require_row(a, row, "mul_row");
  const int ia = a.id(), ir = row.id();
  Mat out = a.value().array().rowwise() * row.value().row(0).array();
  return a.tape()->record(
      std::move(out), {ia, ir},
      [ia, ir](Tape& t, int self) {
        const Mat& g = t.grad(self);
        if (t.requires_grad(ia)) {
          t.grad_slot(ia).array() +=
              g.array().rowwise() * t.value(ir).row(0).array();
        }
        if (t.requires_grad(ir)) {
          t.grad_slot(ir) += g.cwiseProduct(t.value(ia)).colwise().sum();
        }
      },
      "mul_row");
}

Var silu(Var a) {
  const int ia = a.id();
  Mat out = a.value().unaryExpr([](double x) { return x * sigmoid(x); });
  return a.tape()->record(
      std::move(out), {ia},
      [ia](Tape& t, int self) {
        Mat d = t.value(ia).unaryExpr([](double x) {
          const double s = sigmoid(x);
          return s * (1.0 + x * (1.0 - s));
        });
        accumulate(t, ia, t.grad(self).cwiseProduct(d));
      },
      "silu");
}

Var softmax_rows(Var a) {
  const int ia = a.id();
  const Mat& x = a.value();
  Mat y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return a.tape()->record(
      std::move(y), {ia},
      [ia](Tape& t, int self) {
        const Mat& g = t.grad(self);
        const Mat& y = t.value(self);
        Vec dots = g.cwiseProduct(y).rowwise().sum();
        Mat d = y.cwiseProduct(g - dots.replicate(1, g.cols()));
        accumulate(t, ia, d);
      },
      "softmax_rows");
}

Var log_softmax_rows(Var a) {
  const int ia = a.id();
  const Mat& x = a.value();
  Mat y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    y.row(r) = x.row(r).array() - lse;
  }
  return a.tape()->record(
      std::move(y), {ia},
      [ia](Tape& t, int self) {
        const Mat& g = t.grad(self);
        Mat p = t.value(self).array().exp();
        Vec sums = g.rowwise().sum();
        accumulate(t, ia, g - p.cwiseProduct(sums.replicate(1, g.cols())));
      },
      "log_softmax_rows");
}

Var layer_normalize(Var a, double eps) {
  const int ia = a.id();
  const Mat& x = a.value();
  const Eigen::Index n = x.cols();
  Mat y(x.rows(), n);
  Vec inv(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().sum() / n;
    inv(r) = 1.0 / std::sqrt(var + eps);
    y.row(r) = (x.row(r).array() - mu) * inv(r);
  }
  return a.tape()->record(
      std::move(y), {ia},
      [ia, inv](Tape& t, int self) {
        const Mat& g = t.grad(self);
        const Mat& xhat = t.value(self);
        const double n = static_cast<double>(g.cols());
        Mat d(g.rows(), g.cols());
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          const double mg = g.row(r).sum() / n;
          const double mgx = g.row(r).dot(xhat.row(r)) / n;
          d.row(r) = inv(r) * (g.row(r).array() - mg - xhat.row(r).array() * mgx);
        }
        accumulate(t, ia, d);
      },
      "layer_normalize");
}

Var l2_normalize_rows(Var a, double eps) {
  const int ia = a.id();
  const Mat& x = a.value();
  Vec norms = x.rowwise().norm().cwiseMax(eps);
  Mat y = x.array().colwise() / norms.array();
  return a.tape()->record(
      std::move(y), {ia},
      [ia, norms, eps](Tape& t, int self) {
        const Mat& g = t.grad(self);
        const Mat& y = t.value(self);
        Mat d(g.rows(), g.cols());
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          if (norms(r) > eps) {
            d.row(r) = (g.row(r) - y.row(r) * y.row(r).dot(g.row(r))) / norms(r);
          } else {
            d.row(r) = g.row(r) / eps;
          }
        }
        accumulate(t, ia, d);
      },
      "l2_normalize_rows");
}

Var reduce_mean(Var a) {
  const int ia = a.id();
  const double n = static_cast<double>(a.value().size());
  Mat out(1, 1);
  out(0, 0) = a.value().mean();
  return a.tape()->record(
      std::move(out), {ia},
      [ia, n](Tape& t, int self) {
        const double g = t.grad(self)(0, 0);
        if (t.requires_grad(ia)) t.grad_slot(ia).array() += g / n;
      },
      "reduce_mean");
}

Var reduce_sum(Var a) {
  const int ia = a.id();
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(
      std::move(out), {ia},
      [ia](Tape& t, int self) {
        const double g = t.grad(self)(0, 0);
        if (t.requires_grad(ia)) t.grad_slot(ia).array() += g;
      },
      "reduce_sum");
}

Var weighted_sum(Var a, const Mat& weights) {
  if (weights.rows() != a.rows() || weights.cols() != a.cols()) {
    throw InvalidArgument("weighted_sum: weight shape " + shape_str(weights) +
                          " does not match " + shape_str(a.value()));
  }
  const int ia = a.id();
  Mat out(1, 1);
  out(0, 0) = a.value().cwiseProduct(weights).sum();
  return a.tape()->record(
      std::move(out), {ia},
      [ia, weights](Tape& t, int self) {
        accumulate(t, ia, weights * t.grad(self)(0, 0));
      },
      "weighted_sum");
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw InvalidArgument("slice_cols: range out of bounds");
  }
  const int ia = a.id();
  return a.tape()->record(
      a.value().middleCols(start, count), {ia},
      [ia, start, count](Tape& t, int self) {
        if (t.requires_grad(ia)) {
          t.grad_slot(ia).middleCols(start, count) += t.grad(self);
        }
      },
      "slice_cols");
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Tape* tape = parts[0].tape();
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  for (const Var& p : parts) {
    require(p.tape() == tape, "concat_cols: Vars from different tapes");
    require(p.rows() == rows, "concat_cols: row count mismatch");
    ids.push_back(p.id());
    offsets.push_back(cols);
    cols += p.cols();
  }
  Mat out(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.middleCols(offsets[i], parts[i].cols()) = parts[i].value();
  }
  return tape->record(
      std::move(out), ids,
      [ids, offsets](Tape& t, int self) {
        const Mat& g = t.grad(self);
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (!t.requires_grad(ids[i])) continue;
          t.grad_slot(ids[i]) +=
              g.middleCols(offsets[i], t.value(ids[i]).cols());
        }
      },
      "concat_cols");
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Tape* tape = parts[0].tape();
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  for (const Var& p : parts) {
    require(p.tape() == tape, "concat_rows: Vars from different tapes");
    require(p.cols() == cols, "concat_rows: column count mismatch");
    ids.push_back(p.id());
    offsets.push_back(rows);
    rows += p.rows();
  }
  Mat out(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.middleRows(offsets[i], parts[i].rows()) = parts[i].value();
  }
  return tape->record(
      std::move(out), ids,
      [ids, offsets](Tape& t, int self) {
        const Mat& g = t.grad(self);
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (!t.requires_grad(ids[i])) continue;
          t.grad_slot(ids[i]) +=
              g.middleRows(offsets[i], t.value(ids[i]).rows());
        }
      },
      "concat_rows");
}

Var gather_rows(Var a, std::span<const int> index) {
  const Mat& x = a.value();
  std::vector<int> idx(index.begin(), index.end());
  Mat out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= x.rows()) {
      throw InvalidArgument("gather_rows: index " + std::to_string(idx[r]) +
                            " out of range");
    }
    out.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
  }
  const int ia = a.id();
  return a.tape()->record(
      std::move(out), {ia},
      [ia, idx](Tape& t, int self) {
        if (!t.requires_grad(ia)) return;
        const Mat& g = t.grad(self);
        Mat& d = t.grad_slot(ia);
        for (std::size_t r = 0; r < idx.size(); ++r) {
          d.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
        }
      },
      "gather_rows");
}

Var segment_max(Var a, const std::vector<std::vector<int>>& groups) {
  const Mat& x = a.value();
  const Eigen::Index c = x.cols();
  Mat out(static_cast<Eigen::Index>(groups.size()), c);
  Eigen::MatrixXi arg(static_cast<Eigen::Index>(groups.size()), c);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& rows = groups[g];
    if (rows.empty()) throw InvalidArgument("segment_max: empty group");
    for (int r : rows) {
      if (r < 0 || r >= x.rows()) {
        throw InvalidArgument("segment_max: row index out of range");
      }
    }
    const auto gi = static_cast<Eigen::Index>(g);
    for (Eigen::Index j = 0; j < c; ++j) {
      int best = rows[0];
      for (std::size_t k = 1; k < rows.size(); ++k) {
        if (x(rows[k], j) > x(best, j)) best = rows[k];
      }
      arg(gi, j) = best;
      out(gi, j) = x(best, j);
    }
  }
  const int ia = a.id();
  return a.tape()->record(
      std::move(out), {ia},
      [ia, arg](Tape& t, int self) {
        if (!t.requires_grad(ia)) return;
        const Mat& g = t.grad(self);
        Mat& d = t.grad_slot(ia);
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          for (Eigen::Index j = 0; j < g.cols(); ++j) d(arg(r, j), j) += g(r, j);
        }
      },
      "segment_max");
}

Var repeat_row(Var row, Eigen::Index n) {
  require(row.rows() == 1, "repeat_row: expected a single row");
  require(n >= 0, "repeat_row: negative count");
  const int ir = row.id();
  return row.tape()->record(
      row.value().replicate(n, 1), {ir},
      [ir](Tape& t, int self) { accumulate(t, ir, t.grad(self).colwise().sum()); },
      "repeat_row");
}

}  // namespace pgac::ad

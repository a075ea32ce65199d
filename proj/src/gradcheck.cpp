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

#include "pgac/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace pgac {
namespace {

double evaluate(const ScalarFn& f, const ParamSet& params) {
  ad::Tape tape;
  BoundParams bound(tape, params, /*requires_grad=*/false);
  ad::Var out = f(tape, bound);
  require(out.rows() == 1 && out.cols() == 1, "grad_check: f must be scalar");
  return out.value()(0, 0);
}

// Below this the gradient is numerically zero; differences are rounding.
constexpr double kScaleFloor = 1e-8;

}  // namespace

std::string GradCheckReport::to_string() const {
  std::ostringstream os;
  for (const auto& b : blocks) {
    char line[256];
    std::snprintf(line, sizeof(line), "%-28s n=%-6zu abs=%.3e rel=%.3e %s\n",
                  b.name.c_str(), b.entries_checked, b.max_abs_error,
                  b.max_rel_error, b.max_rel_error < tolerance ? "ok" : "FAIL");
    os << line;
  }
  char tail[128];
  std::snprintf(tail, sizeof(tail), "worst=%.3e tolerance=%.1e %s\n", worst,
                tolerance, passed ? "PASS" : "FAIL");
  os << tail;
  return os.str();
}

GradCheckReport grad_check(const ScalarFn& f, const ParamSet& params,
                           const GradCheckOptions& options) {
  require(options.step > 0.0, "grad_check: step must be positive");
  ParamSet analytic;
  {
    ad::Tape tape;
    BoundParams bound(tape, params, /*requires_grad=*/true);
    ad::Var out = f(tape, bound);
    tape.backward(out);
    analytic = bound.gradients();
  }

  GradCheckReport report;
  report.tolerance = options.tolerance;
  ParamSet work = params;
  for (const auto& [name, value] : params) {
    const Mat& a = analytic.at(name);
    const Eigen::Index total = value.size();
    Eigen::Index stride = 1;
    if (options.max_entries_per_block > 0 && total > options.max_entries_per_block) {
      stride = (total + options.max_entries_per_block - 1) / options.max_entries_per_block;
    }
    GradCheckBlock block;
    block.name = name;
    double scale = 0.0, max_err = 0.0;
    Mat& w = work.at(name);
    for (Eigen::Index e = 0; e < total; e += stride) {
      const double orig = w(e);
      w(e) = orig + options.step;
      const double plus = evaluate(f, work);
      w(e) = orig - options.step;
      const double minus = evaluate(f, work);
      w(e) = orig;
      const double numeric = (plus - minus) / (2.0 * options.step);
      max_err = std::max(max_err, std::abs(a(e) - numeric));
      scale = std::max({scale, std::abs(a(e)), std::abs(numeric)});
      ++block.entries_checked;
    }
    block.max_abs_error = max_err;
    block.max_rel_error = max_err / std::max(scale, kScaleFloor);
    report.worst = std::max(report.worst, block.max_rel_error);
    report.blocks.push_back(block);
  }
  report.passed = report.worst < options.tolerance;
  return report;
}

}  // namespace pgac

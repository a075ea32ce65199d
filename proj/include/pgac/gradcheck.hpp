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

#include <functional>
#include <string>
#include <vector>

#include "pgac/autodiff.hpp"
#include "pgac/params.hpp"

namespace pgac {

struct GradCheckBlock {
  std::string name;
  std::size_t entries_checked = 0;
  double max_abs_error = 0.0;
  // max |analytic − numeric| over the block divided by the largest gradient
  // magnitude in the block (either route, floored at 1e-8). Entry-wise
  // ratios blow up on entries whose true gradient is zero.
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;
  double tolerance = 0.0;
  double worst = 0.0;
  bool passed = false;

  std::string to_string() const;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // 0 checks every entry; otherwise an evenly strided subset per block.
  int max_entries_per_block = 0;
};

// f must return a 1×1 Var and be a deterministic function of the bound
// parameters.
using ScalarFn = std::function<ad::Var(ad::Tape&, const BoundParams&)>;

// Reverse-mode gradients of f against central differences.
GradCheckReport grad_check(const ScalarFn& f, const ParamSet& params,
                           const GradCheckOptions& options = {});

}  // namespace pgac

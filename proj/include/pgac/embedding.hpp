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

#include <random>
#include <vector>

#include "pgac/autodiff.hpp"
#include "pgac/params.hpp"
#include "pgac/transport.hpp"

namespace pgac {

// Patch members expressed relative to their patch center, one row per
// (patch, member) pair. Rows of a patch are contiguous.
struct CenteredPatches {
  Mat coords;  // R×3
  std::vector<std::vector<int>> rows_of_patch;
  std::vector<int> patch_of_row;
  std::vector<int> point_of_row;

  int num_patches() const { return static_cast<int>(rows_of_patch.size()); }
};

CenteredPatches normalize_patches(const PatchSet& patches,
                                  const PointCloud& cloud);

struct EmbeddingConfig {
  int dim = 48;
  // Width of the first per-point stage and of the positional MLP.
  int hidden = 64;
};

// embed.pn1.{w,b}: 3→hidden, embed.pn2.{w,b}: 2·hidden→dim,
// embed.pos1.{w,b}: 3→hidden, embed.pos2.{w,b}: hidden→dim.
// Weights ~ N(0, 1/fan_in), biases zero.
void init_embedding_params(ParamSet& params, const EmbeddingConfig& cfg,
                           std::mt19937_64& rng);

// Shared per-point network with patch-wise max pooling:
//   h1 = silu(x W1 + b1); h = [h1, maxpool(h1) of own patch];
//   E  = maxpool(silu(h W2 + b2)).
// L×dim.
ad::Var mini_pointnet_forward(ad::Tape& tape, const CenteredPatches& patches,
                              const BoundParams& p);

// silu(c W3 + b3) W4 + b4 per center row.
ad::Var positional_embedding(ad::Var centers, const BoundParams& p);

struct PatchTokens {
  ad::Var patch;       // E
  ad::Var positional;  // PE
  ad::Var input;       // F = E + PE
};

PatchTokens embed(ad::Tape& tape, const CenteredPatches& patches,
                  const Points& centers, const BoundParams& p);

}  // namespace pgac

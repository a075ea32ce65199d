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

#include "pgac/embedding.hpp"

#include <cmath>

namespace pgac {

CenteredPatches normalize_patches(const PatchSet& patches,
                                  const PointCloud& cloud) {
  const int l = patches.num_patches();
  require(patches.centers.rows() == l, "normalize_patches: center count");
  CenteredPatches out;
  int rows = 0;
  for (const auto& members : patches.patch_points) rows += static_cast<int>(members.size());
  out.coords.resize(rows, 3);
  out.rows_of_patch.resize(l);
  out.patch_of_row.reserve(rows);
  out.point_of_row.reserve(rows);
  int r = 0;
  for (int j = 0; j < l; ++j) {
    for (int i : patches.patch_points[j]) {
      require(i >= 0 && i < cloud.size(), "normalize_patches: point index out of range");
      out.coords.row(r) = cloud.points.row(i) - patches.centers.row(j);
      out.rows_of_patch[j].push_back(r);
      out.patch_of_row.push_back(j);
      out.point_of_row.push_back(i);
      ++r;
    }
  }
  return out;
}

void init_embedding_params(ParamSet& params, const EmbeddingConfig& cfg,
                           std::mt19937_64& rng) {
  require(cfg.dim > 0 && cfg.hidden > 0, "embedding: sizes must be positive");
  auto linear = [&](const std::string& name, int in, int out) {
    params.set(name + ".w", normal_matrix(in, out, 1.0 / std::sqrt(in), rng));
    params.set(name + ".b", Mat::Zero(1, out));
  };
  linear("embed.pn1", 3, cfg.hidden);
  linear("embed.pn2", 2 * cfg.hidden, cfg.dim);
  linear("embed.pos1", 3, cfg.hidden);
  linear("embed.pos2", cfg.hidden, cfg.dim);
}

ad::Var mini_pointnet_forward(ad::Tape& tape, const CenteredPatches& patches,
                              const BoundParams& p) {
  ad::Var x = tape.constant(patches.coords);
  ad::Var h1 = ad::silu(ad::add_row(ad::matmul(x, p("embed.pn1.w")), p("embed.pn1.b")));
  ad::Var pooled = ad::segment_max(h1, patches.rows_of_patch);
  const ad::Var parts[] = {h1, ad::gather_rows(pooled, patches.patch_of_row)};
  ad::Var h = ad::concat_cols(parts);
  ad::Var h2 = ad::silu(ad::add_row(ad::matmul(h, p("embed.pn2.w")), p("embed.pn2.b")));
  return ad::segment_max(h2, patches.rows_of_patch);
}

ad::Var positional_embedding(ad::Var centers, const BoundParams& p) {
  ad::Var h = ad::silu(ad::add_row(ad::matmul(centers, p("embed.pos1.w")), p("embed.pos1.b")));
  return ad::add_row(ad::matmul(h, p("embed.pos2.w")), p("embed.pos2.b"));
}

PatchTokens embed(ad::Tape& tape, const CenteredPatches& patches,
                  const Points& centers, const BoundParams& p) {
  require(centers.rows() == patches.num_patches(), "embed: center count");
  PatchTokens t;
  t.patch = mini_pointnet_forward(tape, patches, p);
  t.positional = positional_embedding(tape.constant(Mat(centers)), p);
  t.input = ad::add(t.patch, t.positional);
  return t;
}

}  // namespace pgac

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

#include "pgac/model.hpp"

namespace pgac {

TransformerConfig transformer_config(const ModelConfig& cfg) {
  TransformerConfig t;
  t.dim = cfg.dim;
  t.heads = cfg.heads;
  t.ffn_mult = cfg.ffn_mult;
  t.init_std = cfg.init_std;
  return t;
}

EmbeddingConfig embedding_config(const ModelConfig& cfg) {
  return EmbeddingConfig{cfg.dim, cfg.embed_hidden};
}

ParamSet init_student_params(const ModelConfig& cfg, std::mt19937_64& rng) {
  const TransformerConfig tc = transformer_config(cfg);
  tc.validate();
  ParamSet p;
  init_embedding_params(p, embedding_config(cfg), rng);
  init_stack_params(p, "enc", cfg.encoder_blocks, tc, rng);
  init_norm_params(p, "enc.norm", cfg.dim);
  init_stack_params(p, "dec", cfg.decoder_blocks, tc, rng);
  init_norm_params(p, "dec.norm", cfg.dim);
  p.set("mask_token", Mat::Zero(1, cfg.dim));
  return p;
}

ParamSet teacher_from_student(const ParamSet& student) {
  return student.subset({"embed.", "enc."});
}

PreparedCloud prepare_cloud(const PointCloud& cloud, const PatchSet& patches,
                            int class_id) {
  PreparedCloud out;
  out.patches = normalize_patches(patches, cloud);
  out.centers = patches.centers;
  out.class_id = class_id;
  return out;
}

ad::Var encode(ad::Var tokens, const BoundParams& p, const ModelConfig& cfg) {
  const TransformerConfig tc = transformer_config(cfg);
  ad::Var h = transformer_stack(tokens, p, "enc", cfg.encoder_blocks, tc);
  return layer_norm(h, p, "enc.norm", tc.norm_eps);
}

Mat teacher_forward(const PreparedCloud& cloud, const ParamSet& teacher,
                    const ModelConfig& cfg) {
  ad::Tape tape;
  BoundParams p(tape, teacher, /*requires_grad=*/false);
  PatchTokens t = embed(tape, cloud.patches, cloud.centers, p);
  return encode(t.input, p, cfg).value();
}

ad::Var student_forward(const PatchTokens& tokens, std::span<const int> visible,
                        std::span<const int> masked, const BoundParams& p,
                        const ModelConfig& cfg) {
  const int L = static_cast<int>(tokens.input.rows());
  require(static_cast<int>(visible.size() + masked.size()) == L,
          "student_forward: mask does not cover all tokens");
  require(!visible.empty(), "student_forward: no visible tokens");

  ad::Var enc = encode(ad::gather_rows(tokens.input, visible), p, cfg);

  // Rows of [enc ; mask tokens] in original token order.
  std::vector<int> order(L, -1);
  for (std::size_t i = 0; i < visible.size(); ++i) order[visible[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < masked.size(); ++i) {
    order[masked[i]] = static_cast<int>(visible.size() + i);
  }
  for (int o : order) require(o >= 0, "student_forward: mask is not a partition");

  std::vector<ad::Var> parts{enc};
  if (!masked.empty()) {
    parts.push_back(ad::repeat_row(p("mask_token"), static_cast<Eigen::Index>(masked.size())));
  }
  ad::Var assembled = ad::gather_rows(ad::concat_rows(parts), order);
  ad::Var x = ad::add(assembled, tokens.positional);

  const TransformerConfig tc = transformer_config(cfg);
  ad::Var h = transformer_stack(x, p, "dec", cfg.decoder_blocks, tc);
  return layer_norm(h, p, "dec.norm", tc.norm_eps);
}

Vec cloud_feature(const PreparedCloud& cloud, const ParamSet& params,
                  const ModelConfig& cfg) {
  return teacher_forward(cloud, params, cfg).colwise().mean().transpose();
}

}  // namespace pgac

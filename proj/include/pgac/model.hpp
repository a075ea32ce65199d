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
#include <span>
#include <vector>

#include "pgac/autodiff.hpp"
#include "pgac/config.hpp"
#include "pgac/embedding.hpp"
#include "pgac/params.hpp"
#include "pgac/transformer.hpp"

namespace pgac {

// Parameter layout of the student:
//   embed.*       patch network and positional MLP
//   enc.<i>.*     encoder blocks, enc.norm.{g,b} final normalization
//   dec.<i>.*     decoder blocks, dec.norm.{g,b}
//   mask_token    1×D, shared by every masked slot
// The teacher holds copies of the embed.* and enc.* blocks only.
TransformerConfig transformer_config(const ModelConfig& cfg);
EmbeddingConfig embedding_config(const ModelConfig& cfg);

ParamSet init_student_params(const ModelConfig& cfg, std::mt19937_64& rng);
ParamSet teacher_from_student(const ParamSet& student);

// A cloud after partitioning, ready for the embedding network.
struct PreparedCloud {
  CenteredPatches patches;
  Points centers;  // L×3
  int class_id = -1;

  int num_tokens() const { return static_cast<int>(centers.rows()); }
};

PreparedCloud prepare_cloud(const PointCloud& cloud, const PatchSet& patches,
                            int class_id = -1);

// Encoder stack plus final normalization.
ad::Var encode(ad::Var tokens, const BoundParams& p, const ModelConfig& cfg);

// Full-input encoding with gradients suppressed. Returns T (L×D).
Mat teacher_forward(const PreparedCloud& cloud, const ParamSet& teacher,
                    const ModelConfig& cfg);

// Visible tokens through the encoder, mask tokens scattered back to their
// positions, PE added on all L slots, then the decoder. Returns S_R (L×D).
ad::Var student_forward(const PatchTokens& tokens, std::span<const int> visible,
                        std::span<const int> masked, const BoundParams& p,
                        const ModelConfig& cfg);

// Mean of the encoded tokens of the unmasked input.
Vec cloud_feature(const PreparedCloud& cloud, const ParamSet& params,
                  const ModelConfig& cfg);

}  // namespace pgac

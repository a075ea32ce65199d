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
#include <string>

#include "pgac/autodiff.hpp"
#include "pgac/params.hpp"

namespace pgac {

struct TransformerConfig {
  int dim = 48;
  int heads = 4;
  int ffn_mult = 4;
  double norm_eps = 1e-6;
  double init_std = 0.02;

  int head_dim() const { return dim / heads; }
  void validate() const;
};

// Parameter names under `prefix`: ln1.g ln1.b wq wk wv wo bo ln2.g ln2.b
// ff1.w ff1.b ff2.w ff2.b. Norm gains start at 1, biases at 0.
void init_block_params(ParamSet& params, const std::string& prefix,
                       const TransformerConfig& cfg, std::mt19937_64& rng);

// LayerNorm with gain `prefix.g` and bias `prefix.b`.
ad::Var layer_norm(ad::Var x, const BoundParams& p, const std::string& prefix,
                   double eps);

// Multi-head self-attention, softmax(Q Kᵀ / √head_dim) V per head, heads
// concatenated and projected by wo/bo. Q, K, V projections carry no bias.
ad::Var self_attention(ad::Var x, const BoundParams& p,
                       const std::string& prefix, const TransformerConfig& cfg);

// Pre-norm residual block:
//   x + attn(ln1(x)), then + ff2(silu(ff1(ln2(·)))).
ad::Var attention_block(ad::Var x, const BoundParams& p,
                        const std::string& prefix,
                        const TransformerConfig& cfg);

// Blocks `prefix.0` … `prefix.(blocks-1)` applied in order.
ad::Var transformer_stack(ad::Var x, const BoundParams& p,
                          const std::string& prefix, int blocks,
                          const TransformerConfig& cfg);

void init_stack_params(ParamSet& params, const std::string& prefix, int blocks,
                       const TransformerConfig& cfg, std::mt19937_64& rng);

void init_norm_params(ParamSet& params, const std::string& prefix, int dim);

}  // namespace pgac

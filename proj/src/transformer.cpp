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

#include "pgac/transformer.hpp"

#include <cmath>
#include <vector>

namespace pgac {

void TransformerConfig::validate() const {
  require(dim > 0, "transformer: dim must be positive");
  require(heads > 0 && dim % heads == 0, "transformer: heads must divide dim");
  require(ffn_mult > 0, "transformer: ffn_mult must be positive");
}

void init_norm_params(ParamSet& params, const std::string& prefix, int dim) {
  params.set(prefix + ".g", Mat::Ones(1, dim));
  params.set(prefix + ".b", Mat::Zero(1, dim));
}

void init_block_params(ParamSet& params, const std::string& prefix,
                       const TransformerConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const int d = cfg.dim, h = cfg.dim * cfg.ffn_mult;
  const double s = cfg.init_std;
  init_norm_params(params, prefix + ".ln1", d);
  params.set(prefix + ".wq", normal_matrix(d, d, s, rng));
  params.set(prefix + ".wk", normal_matrix(d, d, s, rng));
  params.set(prefix + ".wv", normal_matrix(d, d, s, rng));
  params.set(prefix + ".wo", normal_matrix(d, d, s, rng));
  params.set(prefix + ".bo", Mat::Zero(1, d));
  init_norm_params(params, prefix + ".ln2", d);
  params.set(prefix + ".ff1.w", normal_matrix(d, h, s, rng));
  params.set(prefix + ".ff1.b", Mat::Zero(1, h));
  params.set(prefix + ".ff2.w", normal_matrix(h, d, s, rng));
  params.set(prefix + ".ff2.b", Mat::Zero(1, d));
}

void init_stack_params(ParamSet& params, const std::string& prefix, int blocks,
                       const TransformerConfig& cfg, std::mt19937_64& rng) {
  for (int b = 0; b < blocks; ++b) {
    init_block_params(params, prefix + "." + std::to_string(b), cfg, rng);
  }
}

ad::Var layer_norm(ad::Var x, const BoundParams& p, const std::string& prefix,
                   double eps) {
  return ad::add_row(ad::mul_row(ad::layer_normalize(x, eps), p(prefix + ".g")),
                     p(prefix + ".b"));
}

ad::Var self_attention(ad::Var x, const BoundParams& p,
                       const std::string& prefix,
                       const TransformerConfig& cfg) {
  const int hd = cfg.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  ad::Var q = ad::matmul(x, p(prefix + ".wq"));
  ad::Var k = ad::matmul(x, p(prefix + ".wk"));
  ad::Var v = ad::matmul(x, p(prefix + ".wv"));
  std::vector<ad::Var> heads;
  heads.reserve(cfg.heads);
  for (int h = 0; h < cfg.heads; ++h) {
    ad::Var qh = ad::slice_cols(q, h * hd, hd);
    ad::Var kh = ad::slice_cols(k, h * hd, hd);
    ad::Var vh = ad::slice_cols(v, h * hd, hd);
    ad::Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt);
    heads.push_back(ad::matmul(ad::softmax_rows(scores), vh));
  }
  ad::Var merged = cfg.heads == 1 ? heads[0] : ad::concat_cols(heads);
  return ad::add_row(ad::matmul(merged, p(prefix + ".wo")), p(prefix + ".bo"));
}

ad::Var attention_block(ad::Var x, const BoundParams& p,
                        const std::string& prefix,
                        const TransformerConfig& cfg) {
  ad::Var a = self_attention(layer_norm(x, p, prefix + ".ln1", cfg.norm_eps), p,
                             prefix, cfg);
  ad::Var h = ad::add(x, a);
  ad::Var f = layer_norm(h, p, prefix + ".ln2", cfg.norm_eps);
  f = ad::silu(ad::add_row(ad::matmul(f, p(prefix + ".ff1.w")), p(prefix + ".ff1.b")));
  f = ad::add_row(ad::matmul(f, p(prefix + ".ff2.w")), p(prefix + ".ff2.b"));
  return ad::add(h, f);
}

ad::Var transformer_stack(ad::Var x, const BoundParams& p,
                          const std::string& prefix, int blocks,
                          const TransformerConfig& cfg) {
  for (int b = 0; b < blocks; ++b) {
    x = attention_block(x, p, prefix + "." + std::to_string(b), cfg);
  }
  return x;
}

}  // namespace pgac

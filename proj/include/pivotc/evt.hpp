// Copyright (c) the pivotc authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PIVOTC_EVT_HPP_
#define PIVOTC_EVT_HPP_

#include "pivotc/nn.hpp"
#include "pivotc/sparse_tensor.hpp"

namespace pivotc {

// Enhanced voxel transformer block: kNN self-attention over voxels where
// query/key/value projections are two-layer MLPs and keys/values carry a
// relative-position encoding, followed by an MLP block. Residual
// connections wrap both sub-blocks.
struct EvtParams {
  Mlp2 mlp_q, mlp_k, mlp_v;
  Mlp2 mlp_p;   // 3 -> d, relative positions only
  Mlp2 post;    // d -> 2d -> d
  int d = 0;    // feature length
  int k = 16;   // neighbor count
  double c = 1.0;  // extra scaling constant in the attention logits

  static EvtParams init(int d, int k, double c, Rng& rng) {
    EvtParams p;
    p.mlp_q = Mlp2::init(d, d, d, rng);
    p.mlp_k = Mlp2::init(d, d, d, rng);
    p.mlp_v = Mlp2::init(d, d, d, rng);
    p.mlp_p = Mlp2::init(3, d, d, rng);
    p.post = Mlp2::init(d, 2 * d, d, rng);
    p.d = d;
    p.k = k;
    p.c = c;
    return p;
  }

  void register_params(const std::string& prefix, ParamList& out) const {
    mlp_q.register_params(prefix + ".mlp_q", out);
    mlp_k.register_params(prefix + ".mlp_k", out);
    mlp_v.register_params(prefix + ".mlp_v", out);
    mlp_p.register_params(prefix + ".mlp_p", out);
    post.register_params(prefix + ".post", out);
  }
};

// Precomputed per-tensor attention geometry, reusable across cascaded
// blocks with shared weights (it depends only on the coordinates).
struct EvtContext {
  std::vector<int> neighbors;  // N * k_eff flattened neighbor indices
  std::vector<int> queries;    // N * k_eff flattened query row per pair
  std::vector<int> groups;     // N * k_eff flattened output row per pair
  int k_eff = 0;
  ad::Tensor pos_diff;         // (N*k_eff x 3), P_A - P_{A_i}
};

EvtContext build_evt_context(const SparseTensor& t, int k);

// One self-attention pass; geometry is unchanged.
SparseTensor self_attention(const SparseTensor& t, const EvtParams& params,
                            const EvtContext& ctx);

// f += attention(f); f += post_mlp(f).
SparseTensor evt_block(const SparseTensor& t, const EvtParams& params,
                       const EvtContext& ctx);

// Cascades `blocks` applications of the same block (shared weights).
SparseTensor evt_cascade(const SparseTensor& t, const EvtParams& params, int blocks);

}  // namespace pivotc

#endif  // PIVOTC_EVT_HPP_

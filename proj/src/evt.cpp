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

#include "pivotc/evt.hpp"

#include <cmath>

#include "pivotc/errors.hpp"

namespace pivotc {

EvtContext build_evt_context(const SparseTensor& t, int k) {
  EvtContext ctx;
  const int n = static_cast<int>(t.size());
  if (n == 0) return ctx;
  ctx.k_eff = std::min(k, n);
  const auto nbr = knn_voxels(t, t.coords, ctx.k_eff);

  const std::size_t total = static_cast<std::size_t>(n) * ctx.k_eff;
  ctx.neighbors.reserve(total);
  ctx.queries.reserve(total);
  ctx.groups.reserve(total);
  std::vector<double> pos;
  pos.reserve(total * 3);
  for (int q = 0; q < n; ++q) {
    for (int j = 0; j < ctx.k_eff; ++j) {
      const int i = nbr[q][j];
      ctx.neighbors.push_back(i);
      ctx.queries.push_back(q);
      ctx.groups.push_back(q);
      for (int a = 0; a < 3; ++a)
        pos.push_back(static_cast<double>(t.coords[q][a]) -
                      static_cast<double>(t.coords[i][a]));
    }
  }
  ctx.pos_diff = ad::Tensor::from_data(static_cast<int>(total), 3, std::move(pos));
  return ctx;
}

SparseTensor self_attention(const SparseTensor& t, const EvtParams& params,
                            const EvtContext& ctx) {
  if (t.channels() != params.d)
    throw ShapeError("self_attention: tensor carries " + std::to_string(t.channels()) +
                     " channels, block expects " + std::to_string(params.d));
  const int n = static_cast<int>(t.size());
  if (n == 0) return t;

  // Projections on the unique voxels, then gathered per (query, neighbor)
  // pair; the positional term joins both keys and values.
  ad::Tensor q_all = params.mlp_q.forward(t.feats);
  ad::Tensor k_all = params.mlp_k.forward(t.feats);
  ad::Tensor v_all = params.mlp_v.forward(t.feats);
  ad::Tensor e = params.mlp_p.forward(ctx.pos_diff);

  ad::Tensor k_pairs = ad::add(ad::gather_rows(k_all, ctx.neighbors), e);
  ad::Tensor v_pairs = ad::add(ad::gather_rows(v_all, ctx.neighbors), e);
  ad::Tensor q_pairs = ad::gather_rows(q_all, ctx.queries);

  const double inv_scale = 1.0 / (params.c * std::sqrt(static_cast<double>(params.d)));
  ad::Tensor logits = ad::scale(ad::row_dot(q_pairs, k_pairs), inv_scale);
  ad::Tensor weights = ad::softmax_rows(ad::reshape(logits, n, ctx.k_eff));
  ad::Tensor flat_w = ad::reshape(weights, n * ctx.k_eff, 1);
  ad::Tensor weighted = ad::mul_colwise(v_pairs, flat_w);
  ad::Tensor out = ad::scatter_add_rows(weighted, ctx.groups, n);
  return SparseTensor{t.coords, out, t.level};
}

SparseTensor evt_block(const SparseTensor& t, const EvtParams& params,
                       const EvtContext& ctx) {
  SparseTensor attn = self_attention(t, params, ctx);
  ad::Tensor h = ad::add(t.feats, attn.feats);
  ad::Tensor out = ad::add(h, params.post.forward(h));
  return SparseTensor{t.coords, out, t.level};
}

SparseTensor evt_cascade(const SparseTensor& t, const EvtParams& params, int blocks) {
  if (t.size() == 0) return t;
  EvtContext ctx = build_evt_context(t, params.k);
  SparseTensor cur = t;
  for (int i = 0; i < blocks; ++i) cur = evt_block(cur, params, ctx);
  return cur;
}

}  // namespace pivotc

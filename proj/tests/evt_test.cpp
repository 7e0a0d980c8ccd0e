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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <doctest.h>

#include "gradcheck.hpp"
#include "pivotc/evt.hpp"
#include "pivotc/rng.hpp"

using namespace pivotc;
using ad::Tensor;
using pivotc::testing::grad_check;

namespace {

SparseTensor random_sparse(Rng& rng, int level, int count, int channels) {
  std::set<Coord> cs;
  const std::uint64_t side = 1ull << level;
  while (static_cast<int>(cs.size()) < count)
    cs.insert({static_cast<std::uint32_t>(rng.next_below(side)),
               static_cast<std::uint32_t>(rng.next_below(side)),
               static_cast<std::uint32_t>(rng.next_below(side))});
  std::vector<Coord> coords(cs.begin(), cs.end());
  std::vector<double> data(coords.size() * channels);
  for (double& v : data) v = rng.next_double(-1, 1);
  return make_sparse(std::move(coords),
                     Tensor::from_data(count, channels, std::move(data), true), level);
}

void zero_params(Mlp2& m) {
  for (Tensor t : {m.l1.w, m.l1.b, m.l2.w, m.l2.b})
    std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
}

// Direct per-query evaluation of the attention update: for each voxel A,
//   f'_A = sum_i softmax_i(Q_A . K_i / (c sqrt(d))) * V_i
// with K_i = MLP_K(f_i) + E_i, V_i = MLP_V(f_i) + E_i, E_i = MLP_P(P_A - P_i).
std::vector<double> loop_oracle(const SparseTensor& t, const EvtParams& p) {
  const int n = static_cast<int>(t.size());
  const int d = p.d;
  auto mlp = [&](const Mlp2& m, const std::vector<double>& in) {
    Tensor x = Tensor::from_data(1, static_cast<int>(in.size()), in);
    Tensor y = m.forward(x);
    return y.data();
  };
  const auto nbr = knn_voxels(t, t.coords, std::min(p.k, n));
  std::vector<double> out(static_cast<std::size_t>(n) * d, 0.0);
  for (int q = 0; q < n; ++q) {
    std::vector<double> fq(t.feats.data().begin() + static_cast<std::size_t>(q) * d,
                           t.feats.data().begin() + static_cast<std::size_t>(q + 1) * d);
    const auto Q = mlp(p.mlp_q, fq);
    const int kk = static_cast<int>(nbr[q].size());
    std::vector<std::vector<double>> V(kk);
    std::vector<double> logits(kk);
    for (int j = 0; j < kk; ++j) {
      const int i = nbr[q][j];
      std::vector<double> fi(t.feats.data().begin() + static_cast<std::size_t>(i) * d,
                             t.feats.data().begin() + static_cast<std::size_t>(i + 1) * d);
      std::vector<double> pd = {
          static_cast<double>(t.coords[q][0]) - static_cast<double>(t.coords[i][0]),
          static_cast<double>(t.coords[q][1]) - static_cast<double>(t.coords[i][1]),
          static_cast<double>(t.coords[q][2]) - static_cast<double>(t.coords[i][2])};
      const auto E = mlp(p.mlp_p, pd);
      auto K = mlp(p.mlp_k, fi);
      V[j] = mlp(p.mlp_v, fi);
      double dot = 0;
      for (int c = 0; c < d; ++c) {
        K[c] += E[c];
        V[j][c] += E[c];
        dot += Q[c] * K[c];
      }
      logits[j] = dot / (p.c * std::sqrt(static_cast<double>(d)));
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0;
    for (double& l : logits) {
      l = std::exp(l - mx);
      z += l;
    }
    for (int j = 0; j < kk; ++j)
      for (int c = 0; c < d; ++c)
        out[static_cast<std::size_t>(q) * d + c] += (logits[j] / z) * V[j][c];
  }
  return out;
}

}  // namespace

TEST_CASE("k=1 with zero positional MLP reduces to MLP_V") {
  Rng rng(1);
  const int d = 6;
  SparseTensor t = random_sparse(rng, 4, 5, d);
  EvtParams p = EvtParams::init(d, 1, 1.0, rng);
  zero_params(p.mlp_p);
  EvtContext ctx = build_evt_context(t, 1);
  SparseTensor out = self_attention(t, p, ctx);
  Tensor want = p.mlp_v.forward(t.feats);
  for (std::size_t i = 0; i < want.data().size(); ++i)
    CHECK(out.feats.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-12));
}

TEST_CASE("attention weights sum to one per query") {
  Rng rng(2);
  const int d = 8;
  SparseTensor t = random_sparse(rng, 5, 20, d);
  EvtParams p = EvtParams::init(d, 4, 1.0, rng);
  EvtContext ctx = build_evt_context(t, p.k);

  // replicate the weight computation
  Tensor q_all = p.mlp_q.forward(t.feats);
  Tensor k_all = p.mlp_k.forward(t.feats);
  Tensor e = p.mlp_p.forward(ctx.pos_diff);
  Tensor k_pairs = ad::add(ad::gather_rows(k_all, ctx.neighbors), e);
  Tensor q_pairs = ad::gather_rows(q_all, ctx.queries);
  Tensor logits = ad::scale(ad::row_dot(q_pairs, k_pairs), 1.0 / std::sqrt(8.0));
  Tensor w = ad::softmax_rows(ad::reshape(logits, 20, ctx.k_eff));
  for (int r = 0; r < w.rows(); ++r) {
    double sum = 0;
    for (int c = 0; c < w.cols(); ++c) sum += w.at(r, c);
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("attention output matches the per-query loop oracle") {
  Rng rng(3);
  const int d = 8;
  SparseTensor t = random_sparse(rng, 5, 20, d);
  EvtParams p = EvtParams::init(d, 4, 1.0, rng);
  EvtContext ctx = build_evt_context(t, p.k);
  SparseTensor out = self_attention(t, p, ctx);
  const std::vector<double> want = loop_oracle(t, p);
  REQUIRE(out.feats.data().size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i)
    CHECK(std::abs(out.feats.data()[i] - want[i]) < 1e-10);
}

TEST_CASE("zero-initialized block is the identity") {
  Rng rng(4);
  const int d = 6;
  SparseTensor t = random_sparse(rng, 4, 12, d);
  EvtParams p = EvtParams::init(d, 4, 1.0, rng);
  zero_params(p.mlp_q);
  zero_params(p.mlp_k);
  zero_params(p.mlp_v);
  zero_params(p.mlp_p);
  zero_params(p.post);
  SparseTensor out = evt_cascade(t, p, 1);
  for (std::size_t i = 0; i < t.feats.data().size(); ++i)
    CHECK(out.feats.data()[i] == doctest::Approx(t.feats.data()[i]).epsilon(1e-14));
}

TEST_CASE("translating all coordinates leaves the output unchanged") {
  Rng rng(5);
  const int d = 8;
  SparseTensor t = random_sparse(rng, 4, 15, d);
  EvtParams p = EvtParams::init(d, 5, 1.0, rng);
  SparseTensor out1 = evt_cascade(t, p, 3);

  std::vector<Coord> shifted = t.coords;
  for (Coord& c : shifted)
    c = {c[0] + 37, c[1] + 11, c[2] + 23};  // rigid translation
  SparseTensor t2 = make_sparse(shifted, t.feats, 10);
  SparseTensor out2 = evt_cascade(t2, p, 3);
  for (std::size_t i = 0; i < out1.feats.data().size(); ++i)
    CHECK(std::abs(out1.feats.data()[i] - out2.feats.data()[i]) < 1e-10);
}

TEST_CASE("permuted construction yields identically permuted outputs") {
  Rng rng(6);
  const int d = 4;
  SparseTensor t = random_sparse(rng, 4, 10, d);
  EvtParams p = EvtParams::init(d, 3, 1.0, rng);
  SparseTensor out = evt_cascade(t, p, 1);

  // rebuild from a shuffled (coord, feature-row) pairing; construction
  // canonicalizes to sorted order, so outputs must match row-for-row
  std::vector<int> perm(t.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.next_below(i)]);
  std::vector<std::pair<Coord, std::vector<double>>> rows;
  for (int i : perm) {
    std::vector<double> row(t.feats.data().begin() + static_cast<std::size_t>(i) * d,
                            t.feats.data().begin() + static_cast<std::size_t>(i + 1) * d);
    rows.push_back({t.coords[i], std::move(row)});
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Coord> coords;
  std::vector<double> data;
  for (auto& [c, row] : rows) {
    coords.push_back(c);
    data.insert(data.end(), row.begin(), row.end());
  }
  SparseTensor rebuilt =
      make_sparse(coords, Tensor::from_data(static_cast<int>(t.size()), d, data), 4);
  SparseTensor out2 = evt_cascade(rebuilt, p, 1);
  CHECK(out2.coords == out.coords);
  for (std::size_t i = 0; i < out.feats.data().size(); ++i)
    CHECK(out2.feats.data()[i] == doctest::Approx(out.feats.data()[i]).epsilon(1e-14));
}

TEST_CASE("cascading shares one parameter set") {
  Rng rng(7);
  EvtParams p = EvtParams::init(16, 8, 1.0, rng);
  ParamList params;
  p.register_params("evt", params);
  // one block's worth: 4 feature MLPs + the post MLP, 2 linear layers each
  CHECK(params.size() == 5 * 2 * 2);
  std::size_t total = 0;
  for (const auto& np : params) total += np.tensor.size();
  const std::size_t one_block = (16 * 16 + 16) * 2 * 3   // q, k, v
                                + (3 * 16 + 16) + (16 * 16 + 16)  // p
                                + (16 * 32 + 32) + (32 * 16 + 16);  // post
  CHECK(total == one_block);
}

TEST_CASE("gradcheck through a full EVT block") {
  Rng rng(8);
  const int d = 4;
  SparseTensor t = random_sparse(rng, 3, 6, d);
  EvtParams p = EvtParams::init(d, 3, 1.0, rng);
  // Zero-initialized biases put the self-pair ReLU pre-activations exactly
  // at the kink (pos_diff = 0); nudge them off it for the finite differences.
  for (Mlp2* m : {&p.mlp_q, &p.mlp_k, &p.mlp_v, &p.mlp_p, &p.post})
    for (Tensor b : {m->l1.b, m->l2.b})
      for (double& v : b.mutable_data()) v = rng.next_double(-0.3, 0.3);

  std::vector<Tensor> inputs = {t.feats,      p.mlp_q.l1.w, p.mlp_q.l2.w, p.mlp_k.l1.w,
                                p.mlp_k.l2.w, p.mlp_v.l1.w, p.mlp_v.l2.w, p.mlp_p.l1.w,
                                p.mlp_p.l2.w, p.mlp_p.l1.b, p.post.l1.w,  p.post.l2.b};
  auto res = grad_check(
      [&] {
        SparseTensor out = evt_cascade(t, p, 2);
        return ad::mean_all(ad::square(out.feats));
      },
      inputs);
  INFO(res.worst);
  CHECK(res.ok());
}

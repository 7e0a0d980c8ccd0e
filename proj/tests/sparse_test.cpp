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
#include <set>

#include <doctest.h>

#include "pivotc/errors.hpp"
#include "pivotc/nn.hpp"
#include "pivotc/rng.hpp"
#include "pivotc/sparse_tensor.hpp"

using namespace pivotc;
using ad::Tensor;

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
  return make_sparse(std::move(coords), Tensor::from_data(count, channels, std::move(data), true),
                     level);
}

}  // namespace

TEST_CASE("identity kernel reproduces the input features") {
  Rng rng(1);
  const int C = 3;
  SparseTensor t = random_sparse(rng, 4, 30, C);
  // center tap (13) = identity, everything else zero
  Tensor w = Tensor::zeros(27 * C, C, true);
  for (int c = 0; c < C; ++c) w.mutable_data()[(13 * C + c) * C + c] = 1.0;
  Tensor b = Tensor::zeros(1, C, true);
  SparseTensor out = sparse_conv(t, w, b);
  CHECK(out.coords == t.coords);
  for (std::size_t i = 0; i < t.feats.data().size(); ++i)
    CHECK(out.feats.data()[i] == doctest::Approx(t.feats.data()[i]));
}

TEST_CASE("isolated voxel sees only the center tap") {
  Rng rng(2);
  const int C = 2;
  std::vector<Coord> coords = {{8, 8, 8}};  // no neighbors
  Tensor feats = Tensor::from_data(1, C, {0.3, -0.7});
  SparseTensor t = make_sparse(coords, feats, 5);
  Tensor w = Tensor::from_data(27 * C, C, [&] {
    std::vector<double> d(27 * C * C);
    for (double& v : d) v = rng.next_double(-1, 1);
    return d;
  }());
  Tensor b = Tensor::from_data(1, C, {0.1, 0.2});
  SparseTensor out = sparse_conv(t, w, b);
  for (int c = 0; c < C; ++c) {
    double want = b.at(0, c);
    for (int k = 0; k < C; ++k) want += feats.at(0, k) * w.at(13 * C + k, c);
    CHECK(out.feats.at(0, c) == doctest::Approx(want));
  }
}

TEST_CASE("sparse conv on a dense block matches dense 3D convolution") {
  // 4^3 fully dense block; oracle is a plain dense convolution restricted
  // to occupied sites (zero padding outside the block).
  Rng rng(3);
  const int C_in = 2, C_out = 3, S = 4;
  std::vector<Coord> coords;
  for (std::uint32_t x = 0; x < S; ++x)
    for (std::uint32_t y = 0; y < S; ++y)
      for (std::uint32_t z = 0; z < S; ++z) coords.push_back({x, y, z});
  std::sort(coords.begin(), coords.end());
  std::vector<double> feat_data(coords.size() * C_in);
  for (double& v : feat_data) v = rng.next_double(-1, 1);
  SparseTensor t =
      make_sparse(coords, Tensor::from_data(S * S * S, C_in, feat_data), 2);

  std::vector<double> wdata(27 * C_in * C_out);
  for (double& v : wdata) v = rng.next_double(-1, 1);
  Tensor w = Tensor::from_data(27 * C_in, C_out, wdata);
  Tensor b = Tensor::from_data(1, C_out, {0.5, -0.25, 0.125});

  SparseTensor out = sparse_conv(t, w, b);

  auto dense_at = [&](int x, int y, int z, int c) -> double {
    if (x < 0 || y < 0 || z < 0 || x >= S || y >= S || z >= S) return 0.0;
    const std::size_t idx = static_cast<std::size_t>((x * S + y) * S + z);
    return feat_data[idx * C_in + c];
  };
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const int x = static_cast<int>(coords[i][0]);
    const int y = static_cast<int>(coords[i][1]);
    const int z = static_cast<int>(coords[i][2]);
    for (int co = 0; co < C_out; ++co) {
      double want = b.at(0, co);
      int tap = 0;
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dz = -1; dz <= 1; ++dz, ++tap)
            for (int ci = 0; ci < C_in; ++ci)
              want += dense_at(x + dx, y + dy, z + dz, ci) * w.at(tap * C_in + ci, co);
      CHECK(std::abs(out.feats.at(static_cast<int>(i), co) - want) < 1e-10);
    }
  }
}

TEST_CASE("sparse conv rejects channel mismatches") {
  Rng rng(4);
  SparseTensor t = random_sparse(rng, 3, 10, 4);
  Tensor w = Tensor::zeros(27 * 3, 4);  // expects 3 channels
  Tensor b = Tensor::zeros(1, 4);
  CHECK_THROWS_AS(sparse_conv(t, w, b), ShapeError);
}

TEST_CASE("downscale2 merges children sharing a parent") {
  Tensor feats = Tensor::from_data(2, 1, {1.0, 2.0});
  SparseTensor t = make_sparse({{0, 0, 0}, {1, 1, 1}}, feats, 3);
  Tensor w = Tensor::zeros(8 * 1, 1);
  // sum over children: every tap weight 1
  for (int i = 0; i < 8; ++i) w.mutable_data()[i] = 1.0;
  Tensor b = Tensor::zeros(1, 1);
  SparseTensor out = downscale2_conv(t, w, b);
  REQUIRE(out.size() == 1);
  CHECK(out.coords[0] == Coord{0, 0, 0});
  CHECK(out.level == 2);
  CHECK(out.feats.at(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("downscale2 keeps distinct parents distinct") {
  Tensor feats = Tensor::from_data(2, 1, {1.0, 2.0});
  SparseTensor t = make_sparse({{0, 0, 0}, {2, 2, 2}}, feats, 3);
  SparseTensor out = downscale2_conv(t, Tensor::zeros(8, 1), Tensor::zeros(1, 1));
  REQUIRE(out.size() == 2);
  CHECK(out.coords[0] == Coord{0, 0, 0});
  CHECK(out.coords[1] == Coord{1, 1, 1});
}

TEST_CASE("downscale2 geometry equals quantize by 2") {
  Rng rng(5);
  SparseTensor t = random_sparse(rng, 6, 200, 2);
  SparseTensor down = downscale2_conv(t, Tensor::zeros(8 * 2, 4), Tensor::zeros(1, 4));
  PointCloud pc{t.coords, 6};
  PointCloud q = quantize(pc, QuantStep::from_step(2));
  CHECK(down.coords == q.points);
}

TEST_CASE("upsample2_nn spawns exactly eight unique children per voxel") {
  Rng rng(6);
  SparseTensor t = random_sparse(rng, 3, 1, 2);
  ConvParams up = ConvParams::init_upsample(2, 3, rng);
  SparseTensor out = upsample2_nn(t, up.w, up.b);
  CHECK(out.size() == 8);
  CHECK(out.level == 4);
  CHECK(out.channels() == 3);

  SparseTensor two = random_sparse(rng, 3, 2, 2);
  SparseTensor out2 = upsample2_nn(two, up.w, up.b);
  CHECK(out2.size() == 16);
  std::set<Coord> unique_coords(out2.coords.begin(), out2.coords.end());
  CHECK(unique_coords.size() == 16);
}

TEST_CASE("upsample2_nn is linear: zero input and bias give zero children") {
  SparseTensor t = make_sparse({{1, 2, 3}}, Tensor::zeros(1, 4), 3);
  SparseTensor out = upsample2_nn(t, Tensor::zeros(4, 8 * 2), Tensor::zeros(1, 8 * 2));
  for (double v : out.feats.data()) CHECK(v == 0.0);
}

TEST_CASE("upsample then downscale geometry returns the original parents") {
  Rng rng(7);
  SparseTensor t = random_sparse(rng, 5, 64, 2);
  ConvParams up = ConvParams::init_upsample(2, 2, rng);
  SparseTensor children = upsample2_nn(t, up.w, up.b);
  SparseTensor parents = downscale2_conv(children, Tensor::zeros(8 * 2, 2), Tensor::zeros(1, 2));
  CHECK(parents.coords == t.coords);
}

TEST_CASE("prune keeps order and handles the degenerate masks") {
  Rng rng(8);
  SparseTensor t = random_sparse(rng, 4, 20, 3);
  SparseTensor all = prune(t, std::vector<bool>(20, true));
  CHECK(all.coords == t.coords);
  CHECK(all.feats.data() == t.feats.data());

  SparseTensor none = prune(t, std::vector<bool>(20, false));
  CHECK(none.size() == 0);
  CHECK(none.feats.rows() == 0);
  CHECK(none.feats.cols() == 3);

  std::vector<bool> mask(20, false);
  mask[3] = mask[11] = true;
  SparseTensor some = prune(t, mask);
  REQUIRE(some.size() == 2);
  CHECK(some.coords[0] == t.coords[3]);
  CHECK(some.coords[1] == t.coords[11]);
  CHECK(some.feats.at(1, 2) == t.feats.at(11, 2));

  CHECK_THROWS_AS(prune(t, std::vector<bool>(19, true)), ShapeError);
}

TEST_CASE("knn returns self first for occupied queries") {
  Rng rng(9);
  SparseTensor t = random_sparse(rng, 5, 40, 1);
  auto nbr = knn_voxels(t, t.coords, 1);
  for (std::size_t i = 0; i < t.size(); ++i) {
    REQUIRE(nbr[i].size() == 1);
    CHECK(nbr[i][0] == static_cast<int>(i));
  }
}

TEST_CASE("knn lists shrink when the tensor has fewer than k voxels") {
  Rng rng(10);
  SparseTensor t = random_sparse(rng, 4, 2, 1);
  auto nbr = knn_voxels(t, {{0, 0, 0}}, 4);
  CHECK(nbr[0].size() == 2);
}

TEST_CASE("knn on an empty tensor yields empty lists") {
  SparseTensor t;
  t.feats = Tensor::zeros(0, 1);
  auto nbr = knn_voxels(t, {{1, 1, 1}}, 3);
  REQUIRE(nbr.size() == 1);
  CHECK(nbr[0].empty());
}

TEST_CASE("knn matches exhaustive search with deterministic tie-breaks") {
  Rng rng(11);
  SparseTensor t = random_sparse(rng, 5, 200, 1);
  std::vector<Coord> queries;
  for (int i = 0; i < 50; ++i)
    queries.push_back({static_cast<std::uint32_t>(rng.next_below(32)),
                       static_cast<std::uint32_t>(rng.next_below(32)),
                       static_cast<std::uint32_t>(rng.next_below(32))});
  const int k = 16;
  auto fast = knn_voxels(t, queries, k);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    // oracle: full sort of all (distance, coord) pairs
    std::vector<std::pair<std::uint64_t, int>> all;
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::uint64_t d = 0;
      for (int a = 0; a < 3; ++a) {
        const std::int64_t diff = static_cast<std::int64_t>(queries[q][a]) -
                                  static_cast<std::int64_t>(t.coords[i][a]);
        d += static_cast<std::uint64_t>(diff * diff);
      }
      all.push_back({d, static_cast<int>(i)});
    }
    std::sort(all.begin(), all.end());
    REQUIRE(fast[q].size() == static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) CHECK(fast[q][j] == all[j].second);
  }
}

TEST_CASE("ops preserve the sorted-unique coordinate invariant") {
  Rng rng(12);
  SparseTensor t = random_sparse(rng, 5, 100, 2);
  auto is_sorted_unique = [](const std::vector<Coord>& cs) {
    for (std::size_t i = 1; i < cs.size(); ++i)
      if (!(cs[i - 1] < cs[i])) return false;
    return true;
  };
  ConvParams conv = ConvParams::init(27, 2, 2, rng);
  CHECK(is_sorted_unique(sparse_conv(t, conv.w, conv.b).coords));
  ConvParams down = ConvParams::init(8, 2, 2, rng);
  CHECK(is_sorted_unique(downscale2_conv(t, down.w, down.b).coords));
  ConvParams up = ConvParams::init_upsample(2, 2, rng);
  CHECK(is_sorted_unique(upsample2_nn(t, up.w, up.b).coords));
  std::vector<bool> mask(100);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.next_below(2) == 0;
  CHECK(is_sorted_unique(prune(t, mask).coords));
}

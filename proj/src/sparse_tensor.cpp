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

#include "pivotc/sparse_tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <numeric>

#include "pivotc/errors.hpp"
#include "pivotc/parallel.hpp"

namespace pivotc {

namespace {

[[maybe_unused]] bool sorted_unique(const std::vector<Coord>& coords) {
  for (std::size_t i = 1; i < coords.size(); ++i)
    if (!(coords[i - 1] < coords[i])) return false;
  return true;
}

void check_channels(const SparseTensor& t) {
  if (t.feats.defined() && t.feats.rows() != static_cast<int>(t.coords.size()))
    throw ShapeError("sparse tensor has " + std::to_string(t.coords.size()) +
                     " voxels but " + std::to_string(t.feats.rows()) + " feature rows");
}

std::uint64_t sq_dist(const Coord& a, const Coord& b) {
  std::uint64_t acc = 0;
  for (int i = 0; i < 3; ++i) {
    const std::int64_t d = static_cast<std::int64_t>(a[i]) - static_cast<std::int64_t>(b[i]);
    acc += static_cast<std::uint64_t>(d * d);
  }
  return acc;
}

}  // namespace

SparseTensor make_sparse(std::vector<Coord> coords, ad::Tensor feats, int level) {
  assert(sorted_unique(coords));
  SparseTensor t{std::move(coords), std::move(feats), level};
  check_channels(t);
  return t;
}

int find_voxel(const std::vector<Coord>& coords, const Coord& c) {
  auto it = std::lower_bound(coords.begin(), coords.end(), c);
  if (it == coords.end() || *it != c) return -1;
  return static_cast<int>(it - coords.begin());
}

std::vector<int> conv_neighbor_table(const std::vector<Coord>& coords) {
  assert(sorted_unique(coords));
  const std::size_t n = coords.size();
  std::vector<int> table(n * 27, -1);
  parallel_for(n, [&](std::size_t i) {
    const Coord& p = coords[i];
    int tap = 0;
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz, ++tap) {
          if (tap == 13) {  // center
            table[i * 27 + 13] = static_cast<int>(i);
            continue;
          }
          const std::int64_t x = static_cast<std::int64_t>(p[0]) + dx;
          const std::int64_t y = static_cast<std::int64_t>(p[1]) + dy;
          const std::int64_t z = static_cast<std::int64_t>(p[2]) + dz;
          if (x < 0 || y < 0 || z < 0) continue;
          table[i * 27 + tap] = find_voxel(
              coords, Coord{static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y),
                            static_cast<std::uint32_t>(z)});
        }
      }
    }
  });
  return table;
}

SparseTensor sparse_conv(const SparseTensor& t, const ad::Tensor& weight,
                         const ad::Tensor& bias) {
  check_channels(t);
  if (weight.rows() != 27 * t.channels())
    throw ShapeError("sparse_conv: weight expects " +
                     std::to_string(weight.rows() / 27) + " input channels, tensor has " +
                     std::to_string(t.channels()));
  const std::vector<int> table = conv_neighbor_table(t.coords);
  ad::Tensor out = ad::gather_matmul(t.feats, weight, bias, table, 27);
  return SparseTensor{t.coords, out, t.level};
}

SparseTensor downscale2_conv(const SparseTensor& t, const ad::Tensor& weight,
                             const ad::Tensor& bias) {
  check_channels(t);
  if (t.level < 1) throw ShapeError("downscale2: tensor already at level 0");
  if (weight.rows() != 8 * t.channels())
    throw ShapeError("downscale2: weight expects " + std::to_string(weight.rows() / 8) +
                     " input channels, tensor has " + std::to_string(t.channels()));
  // Halving does not preserve lexicographic order; canonicalize.
  std::vector<Coord> parents;
  parents.reserve(t.size());
  for (const Coord& c : t.coords) parents.push_back({c[0] >> 1, c[1] >> 1, c[2] >> 1});
  std::sort(parents.begin(), parents.end());
  parents.erase(std::unique(parents.begin(), parents.end()), parents.end());

  std::vector<int> table(parents.size() * 8, -1);
  parallel_for(parents.size(), [&](std::size_t i) {
    const Coord& p = parents[i];
    for (int slot = 0; slot < 8; ++slot) {
      const Coord child = {(p[0] << 1) | static_cast<std::uint32_t>(slot >> 2),
                           (p[1] << 1) | static_cast<std::uint32_t>((slot >> 1) & 1),
                           (p[2] << 1) | static_cast<std::uint32_t>(slot & 1)};
      table[i * 8 + slot] = find_voxel(t.coords, child);
    }
  });
  ad::Tensor out = ad::gather_matmul(t.feats, weight, bias, table, 8);
  return SparseTensor{std::move(parents), out, t.level - 1};
}

SparseTensor upsample2_nn(const SparseTensor& t, const ad::Tensor& weight,
                          const ad::Tensor& bias) {
  check_channels(t);
  if (weight.rows() != t.channels())
    throw ShapeError("upsample2_nn: weight expects " + std::to_string(weight.rows()) +
                     " input channels, tensor has " + std::to_string(t.channels()));
  if (weight.cols() % 8 != 0 || bias.cols() != weight.cols())
    throw ShapeError("upsample2_nn: weight/bias must carry 8 child blocks");
  const int cout = weight.cols() / 8;
  const int n = static_cast<int>(t.size());

  // (N x 8*C_out) -> (8N x C_out); row p*8 + slot is child `slot` of parent p.
  ad::Tensor blocks = ad::add_rowwise(ad::matmul(t.feats, weight), bias);
  ad::Tensor child_feats = ad::reshape(blocks, 8 * n, cout);

  std::vector<Coord> children(static_cast<std::size_t>(8) * n);
  for (int p = 0; p < n; ++p) {
    const Coord& c = t.coords[p];
    for (int slot = 0; slot < 8; ++slot)
      children[static_cast<std::size_t>(p) * 8 + slot] = {
          (c[0] << 1) | static_cast<std::uint32_t>(slot >> 2),
          (c[1] << 1) | static_cast<std::uint32_t>((slot >> 1) & 1),
          (c[2] << 1) | static_cast<std::uint32_t>(slot & 1)};
  }
  // Children are unique (each has exactly one parent) but not sorted.
  std::vector<int> order(children.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return children[a] < children[b]; });
  std::vector<Coord> sorted(children.size());
  for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = children[order[i]];
  ad::Tensor sorted_feats = ad::gather_rows(child_feats, order);
  return make_sparse(std::move(sorted), sorted_feats, t.level + 1);
}

SparseTensor prune(const SparseTensor& t, const std::vector<bool>& keep) {
  check_channels(t);
  if (keep.size() != t.size())
    throw ShapeError("prune: mask of " + std::to_string(keep.size()) + " entries for " +
                     std::to_string(t.size()) + " voxels");
  std::vector<Coord> coords;
  std::vector<int> rows;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) {
      coords.push_back(t.coords[i]);
      rows.push_back(static_cast<int>(i));
    }
  }
  ad::Tensor feats = ad::gather_rows(t.feats, rows);
  return SparseTensor{std::move(coords), feats, t.level};
}

std::vector<std::vector<int>> knn_voxels(const SparseTensor& t,
                                         const std::vector<Coord>& queries, int k) {
  if (k < 1) throw ShapeError("knn_voxels: k must be >= 1");
  std::vector<std::vector<int>> result(queries.size());
  if (t.size() == 0) return result;
  parallel_for(queries.size(), [&](std::size_t q) {
    const Coord& query = queries[q];
    // (distance^2, index); index order equals coordinate order, which
    // implements the lexicographic tie-break.
    std::vector<std::pair<std::uint64_t, int>> best;
    best.reserve(static_cast<std::size_t>(k) + 1);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::uint64_t d = sq_dist(query, t.coords[i]);
      if (best.size() == static_cast<std::size_t>(k) && d >= best.back().first) continue;
      const std::pair<std::uint64_t, int> cand{d, static_cast<int>(i)};
      best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
      if (best.size() > static_cast<std::size_t>(k)) best.pop_back();
    }
    result[q].reserve(best.size());
    for (const auto& [d, i] : best) result[q].push_back(i);
  });
  return result;
}

}  // namespace pivotc

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

#ifndef PIVOTC_SPARSE_TENSOR_HPP_
#define PIVOTC_SPARSE_TENSOR_HPP_

#include <vector>

#include "pivotc/point_cloud.hpp"
#include "pivotc/tensor.hpp"

namespace pivotc {

// Sorted unique voxel coordinates at a stated grid level (bit-depth) with a
// per-voxel feature matrix. Immutable between ops by convention.
struct SparseTensor {
  std::vector<Coord> coords;
  ad::Tensor feats;  // (coords.size() x C)
  int level = 0;

  std::size_t size() const { return coords.size(); }
  int channels() const { return feats.defined() ? feats.cols() : 0; }
};

// Validates (debug assertion) that coords are sorted and unique.
SparseTensor make_sparse(std::vector<Coord> coords, ad::Tensor feats, int level);

// Index of coordinate c in the sorted list, or -1.
int find_voxel(const std::vector<Coord>& coords, const Coord& c);

// N x 27 neighbor table over the 3^3 window, offsets in lexicographic
// (dx, dy, dz) order (center at tap 13); -1 where the neighbor is empty.
std::vector<int> conv_neighbor_table(const std::vector<Coord>& coords);

// Submanifold 3x3x3 convolution: output coords equal input coords, no
// dilation of the active set. weight is (27*C_in x C_out), bias (1 x C_out).
SparseTensor sparse_conv(const SparseTensor& t, const ad::Tensor& weight,
                         const ad::Tensor& bias);

// Stride-2 convolution: output coords are the unique parents floor(c/2),
// each parent aggregating its occupied children over the 2^3 window
// (taps in child-slot order). weight is (8*C_in x C_out). Level drops by 1.
SparseTensor downscale2_conv(const SparseTensor& t, const ad::Tensor& weight,
                             const ad::Tensor& bias);

// Transposed-convolution upsampling: every voxel spawns all 8 children
// (coords*2 + offset), one weight block per child slot. weight is
// (C_in x 8*C_out), bias (1 x 8*C_out). Level rises by 1.
SparseTensor upsample2_nn(const SparseTensor& t, const ad::Tensor& weight,
                          const ad::Tensor& bias);

// Drops voxels whose mask entry is false; order is preserved.
SparseTensor prune(const SparseTensor& t, const std::vector<bool>& keep);

// For each query, the indices of the <= k nearest occupied voxels by
// squared L2 distance on coordinates, ties broken by lexicographic
// coordinate. A query that is itself occupied lists itself first.
std::vector<std::vector<int>> knn_voxels(const SparseTensor& t,
                                         const std::vector<Coord>& queries, int k);

}  // namespace pivotc

#endif  // PIVOTC_SPARSE_TENSOR_HPP_

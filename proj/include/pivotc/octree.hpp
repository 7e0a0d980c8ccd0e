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

#ifndef PIVOTC_OCTREE_HPP_
#define PIVOTC_OCTREE_HPP_

#include <cstdint>

#include "pivotc/bytes.hpp"
#include "pivotc/point_cloud.hpp"

namespace pivotc {

// Lossless octree occupancy coding.
//
// The tree is traversed breadth-first, one level per coordinate bit
// (MSB first). Nodes within a level are visited in lexicographic order of
// their coordinates. Each occupied node emits one occupancy byte where bit
// (7 - i) marks child i, with i = (x_bit << 2) | (y_bit << 1) | z_bit.
// Every bit is coded by an adaptive binary model selected by the context
// (bit index, partial byte pattern, occupied-sibling-count bucket).

// Raw occupancy bytes in coding order, before entropy coding. Exposed for
// tests and diagnostics.
std::vector<std::uint8_t> octree_occupancy_bytes(const PointCloud& pc);

// Entropy-codes the cloud. Throws CodecError on an empty input.
ByteVec encode_octree(const PointCloud& pc);

// Inverse of encode_octree. num_points is the expected cardinality; a
// mismatch, a zero occupancy byte or a truncated stream raises CodecError.
PointCloud decode_octree(const std::uint8_t* data, std::size_t size, int bit_depth,
                         std::uint64_t num_points);
inline PointCloud decode_octree(const ByteVec& bytes, int bit_depth,
                                std::uint64_t num_points) {
  return decode_octree(bytes.data(), bytes.size(), bit_depth, num_points);
}

}  // namespace pivotc

#endif  // PIVOTC_OCTREE_HPP_

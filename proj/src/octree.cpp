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

#include "pivotc/octree.hpp"

#include <algorithm>
#include <bit>
#include <vector>

#include "pivotc/errors.hpp"
#include "pivotc/range_coder.hpp"

namespace pivotc {

namespace {

// Nodes are addressed by Morton codes: 3 bits per level, x highest within
// each triple so the low 3 bits of a child code equal its occupancy slot
// (x_bit << 2 | y_bit << 1 | z_bit). Shifting a sorted code list right by
// 3*(levels) keeps it sorted, which makes per-level prefix grouping exact —
// plain lexicographic coordinate order does not survive halving.
constexpr int kMaxOctreeDepth = 21;  // 3 * 21 = 63 Morton bits

std::uint64_t morton(const Coord& p, int bits) {
  std::uint64_t code = 0;
  for (int b = 0; b < bits; ++b) {
    code |= ((p[0] >> b) & 1ull) << (3 * b + 2);
    code |= ((p[1] >> b) & 1ull) << (3 * b + 1);
    code |= ((p[2] >> b) & 1ull) << (3 * b + 0);
  }
  return code;
}

Coord unmorton(std::uint64_t code, int bits) {
  Coord p = {0, 0, 0};
  for (int b = 0; b < bits; ++b) {
    p[0] |= static_cast<std::uint32_t>((code >> (3 * b + 2)) & 1ull) << b;
    p[1] |= static_cast<std::uint32_t>((code >> (3 * b + 1)) & 1ull) << b;
    p[2] |= static_cast<std::uint32_t>((code >> (3 * b + 0)) & 1ull) << b;
  }
  return p;
}

// Context layout: 255 (bit index, partial pattern) states x 8 sibling
// buckets; sum_{j=0}^{7} 2^j = 255.
constexpr int kPatternStates = 255;
constexpr int kModelCount = kPatternStates * 8;

inline int model_index(int bit_index, std::uint32_t partial, int bucket) {
  return (bucket - 1) * kPatternStates + ((1 << bit_index) - 1) + static_cast<int>(partial);
}

// Calls emit(occupancy_byte, parent_bucket) for every node in coding order
// (breadth-first, Morton order within each level) and tracks the sibling
// bucket of each node.
template <typename Emit>
void walk_occupancy(const PointCloud& pc, Emit&& emit) {
  const int n = pc.bit_depth;
  std::vector<std::uint64_t> codes;
  codes.reserve(pc.points.size());
  for (const Coord& p : pc.points) codes.push_back(morton(p, n));
  std::sort(codes.begin(), codes.end());

  std::vector<int> buckets = {1};  // per current level node, root gets 1
  for (int level = 0; level < n; ++level) {
    const int child_shift = 3 * (n - level - 1);
    std::vector<int> next_buckets;
    std::size_t node = 0;  // index into the current level's nodes
    std::size_t i = 0;
    while (i < codes.size()) {
      const std::uint64_t parent_code = codes[i] >> (child_shift + 3);
      std::uint8_t byte = 0;
      std::uint64_t prev_child = ~0ull;
      while (i < codes.size() && (codes[i] >> (child_shift + 3)) == parent_code) {
        const std::uint64_t child = codes[i] >> child_shift;
        if (child != prev_child) {
          byte |= static_cast<std::uint8_t>(0x80u >> (child & 7));
          prev_child = child;
        }
        ++i;
      }
      emit(byte, buckets[node]);
      ++node;
      const int occupied = std::popcount(byte);
      for (int k = 0; k < occupied; ++k) next_buckets.push_back(occupied);
    }
    buckets = std::move(next_buckets);
  }
}

}  // namespace

std::vector<std::uint8_t> octree_occupancy_bytes(const PointCloud& pc) {
  if (pc.empty()) throw CodecError("cannot build octree of an empty point cloud");
  if (pc.bit_depth > kMaxOctreeDepth) throw CodecError("octree depth exceeds 21 bits");
  std::vector<std::uint8_t> bytes;
  walk_occupancy(pc, [&](std::uint8_t b, int) { bytes.push_back(b); });
  return bytes;
}

ByteVec encode_octree(const PointCloud& pc) {
  if (pc.empty()) throw CodecError("cannot encode an empty point cloud");
  if (pc.bit_depth > kMaxOctreeDepth) throw CodecError("octree depth exceeds 21 bits");
  RangeEncoder enc;
  std::vector<AdaptiveBitModel> models(kModelCount);
  walk_occupancy(pc, [&](std::uint8_t byte, int bucket) {
    std::uint32_t partial = 0;
    for (int j = 0; j < 8; ++j) {
      const int bit = (byte >> (7 - j)) & 1;
      enc.encode_bit(models[model_index(j, partial, bucket)], bit);
      partial = (partial << 1) | static_cast<std::uint32_t>(bit);
    }
  });
  return enc.finish();
}

PointCloud decode_octree(const std::uint8_t* data, std::size_t size, int bit_depth,
                         std::uint64_t num_points) {
  if (bit_depth < 1 || bit_depth > kMaxOctreeDepth)
    throw CodecError("invalid octree bit depth " + std::to_string(bit_depth));
  RangeDecoder dec(data, size);
  std::vector<AdaptiveBitModel> models(kModelCount);

  // Spawning children in slot order from Morton-ordered parents keeps every
  // level Morton-ordered, exactly replaying the encoder's traversal.
  std::vector<std::uint64_t> nodes = {0};
  std::vector<int> buckets = {1};
  for (int level = 0; level < bit_depth; ++level) {
    std::vector<std::uint64_t> next_nodes;
    std::vector<int> next_buckets;
    next_nodes.reserve(nodes.size() * 2);
    next_buckets.reserve(nodes.size() * 2);
    for (std::size_t ni = 0; ni < nodes.size(); ++ni) {
      std::uint32_t partial = 0;
      std::uint8_t byte = 0;
      for (int j = 0; j < 8; ++j) {
        const int bit = dec.decode_bit(models[model_index(j, partial, buckets[ni])]);
        byte = static_cast<std::uint8_t>((byte << 1) | bit);
        partial = (partial << 1) | static_cast<std::uint32_t>(bit);
      }
      if (byte == 0)
        throw CodecError("corrupt octree stream: empty occupancy byte at level " +
                         std::to_string(level));
      const int occupied = std::popcount(byte);
      for (int slot = 0; slot < 8; ++slot) {
        if (!(byte & (0x80u >> slot))) continue;
        next_nodes.push_back((nodes[ni] << 3) | static_cast<std::uint64_t>(slot));
        next_buckets.push_back(occupied);
      }
    }
    nodes = std::move(next_nodes);
    buckets = std::move(next_buckets);
  }
  if (nodes.size() != num_points)
    throw CodecError("corrupt octree stream: decoded " + std::to_string(nodes.size()) +
                     " points, header says " + std::to_string(num_points));
  std::vector<Coord> points;
  points.reserve(nodes.size());
  for (std::uint64_t code : nodes) points.push_back(unmorton(code, bit_depth));
  return dedup_sort(std::move(points), bit_depth);
}

}  // namespace pivotc

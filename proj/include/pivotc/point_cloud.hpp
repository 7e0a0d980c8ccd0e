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

#ifndef PIVOTC_POINT_CLOUD_HPP_
#define PIVOTC_POINT_CLOUD_HPP_

#include <array>
#include <cstdint>
#include <vector>

namespace pivotc {

// Integer voxel coordinate. Lexicographic (x, y, z) order is the canonical
// order everywhere; std::array's operator< already compares that way.
using Coord = std::array<std::uint32_t, 3>;

// Real-valued 3D point, used for dequantized supports and reconstructions.
using Vec3 = std::array<double, 3>;

// Power-of-two quantization step.
struct QuantStep {
  std::uint32_t s = 1;

  // Throws RangeError unless s is a positive power of two.
  static QuantStep from_step(std::uint32_t s);
  // 2^bits.
  static QuantStep from_bits(int bits);

  int log2() const;
};

// Deduplicated integer point set with a declared bit-depth n: every
// coordinate lies in [0, 2^n - 1] and points are unique and sorted.
// Immutable by convention after construction.
struct PointCloud {
  std::vector<Coord> points;
  int bit_depth = 1;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  // Largest representable coordinate, 2^bit_depth - 1.
  std::uint32_t max_coord() const {
    return bit_depth >= 32 ? ~0u : (1u << bit_depth) - 1u;
  }
};

// Canonicalizes a raw coordinate list: checks the [0, 2^n - 1] range,
// sorts lexicographically and removes duplicates. Idempotent and
// independent of the input order.
PointCloud dedup_sort(std::vector<Coord> points, int bit_depth);

// Floor-divides every coordinate by s and re-canonicalizes. The result has
// bit_depth n - log2(s). Requires s <= 2^n.
PointCloud quantize(const PointCloud& pc, QuantStep s);

enum class DequantMode { kCorner, kCenter };

// Maps voxel coordinates back to real space: coord*s (corner) or
// coord*s + s/2 (center). Same cardinality and order as the input.
std::vector<Vec3> dequantize(const PointCloud& pc, QuantStep s, DequantMode mode);

}  // namespace pivotc

#endif  // PIVOTC_POINT_CLOUD_HPP_

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

#include "pivotc/point_cloud.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "pivotc/errors.hpp"

namespace pivotc {

QuantStep QuantStep::from_step(std::uint32_t s) {
  if (s == 0 || !std::has_single_bit(s))
    throw RangeError("quantization step must be a positive power of two, got " +
                     std::to_string(s));
  return QuantStep{s};
}

QuantStep QuantStep::from_bits(int bits) {
  if (bits < 0 || bits > 31) throw RangeError("quantization step bits out of range");
  return QuantStep{1u << bits};
}

int QuantStep::log2() const { return std::countr_zero(s); }

PointCloud dedup_sort(std::vector<Coord> points, int bit_depth) {
  if (bit_depth < 0 || bit_depth > 31) throw RangeError("bit_depth out of range");
  const std::uint32_t limit = bit_depth >= 32 ? ~0u : (1u << bit_depth) - 1u;
  for (const Coord& p : points) {
    for (int a = 0; a < 3; ++a) {
      if (p[a] > limit)
        throw RangeError("coordinate " + std::to_string(p[a]) + " exceeds " +
                         std::to_string(limit) + " for bit depth " +
                         std::to_string(bit_depth));
    }
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  return PointCloud{std::move(points), bit_depth};
}

PointCloud quantize(const PointCloud& pc, QuantStep s) {
  const int shift = s.log2();
  if (shift > pc.bit_depth)
    throw RangeError("quantization step 2^" + std::to_string(shift) +
                     " exceeds cloud extent 2^" + std::to_string(pc.bit_depth));
  if (shift == 0) return pc;
  std::vector<Coord> out;
  out.reserve(pc.points.size());
  for (const Coord& p : pc.points)
    out.push_back({p[0] >> shift, p[1] >> shift, p[2] >> shift});
  return dedup_sort(std::move(out), pc.bit_depth - shift);
}

std::vector<Vec3> dequantize(const PointCloud& pc, QuantStep s, DequantMode mode) {
  const double step = static_cast<double>(s.s);
  const double off = mode == DequantMode::kCenter ? step / 2.0 : 0.0;
  std::vector<Vec3> out;
  out.reserve(pc.points.size());
  for (const Coord& p : pc.points)
    out.push_back({p[0] * step + off, p[1] * step + off, p[2] * step + off});
  return out;
}

}  // namespace pivotc

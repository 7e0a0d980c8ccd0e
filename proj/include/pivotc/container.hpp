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

#ifndef PIVOTC_CONTAINER_HPP_
#define PIVOTC_CONTAINER_HPP_

#include <cstdint>
#include <vector>

#include "pivotc/bytes.hpp"

namespace pivotc {

// PVTN bitstream container, version 1. Little-endian layout:
//
//   magic   4 bytes "PVTN"
//   version u8
//   n       u8    full bit-depth
//   n1'     u8    bit-interval endpoints,
//   n1      u8    n1' <= n1 <= n2 <= n
//   n2      u8
//   flags   u8    bit0: point stage active (n2 < n)
//                 bit1: voxel stage active (n1 < n2)
//   num_points   u64
//   stage_count_len u32, then that many u32 ground-truth occupied-voxel
//                  counts, one per voxel upsampling stage, coarse to fine
//   part_len u32, part_bytes
//   feat_len u32, feat_bytes
struct BitstreamContainer {
  std::uint8_t version = 1;
  std::uint8_t n = 1;
  std::uint8_t n1_prime = 1;
  std::uint8_t n1 = 1;
  std::uint8_t n2 = 1;
  std::uint8_t flags = 0;
  std::uint64_t num_points = 0;
  std::vector<std::uint32_t> stage_counts;
  ByteVec part_bytes;
  ByteVec feat_bytes;

  static constexpr std::uint8_t kFlagPointStage = 1u << 0;
  static constexpr std::uint8_t kFlagVoxelStage = 1u << 1;

  bool point_stage() const { return flags & kFlagPointStage; }
  bool voxel_stage() const { return flags & kFlagVoxelStage; }

  bool operator==(const BitstreamContainer&) const = default;
};

// Serializes; throws FormatError if the container violates its invariants.
ByteVec pack_container(const BitstreamContainer& c);

// Parses and validates. unpack(pack(x)) == x, byte-exact.
BitstreamContainer unpack_container(const std::uint8_t* data, std::size_t size);
inline BitstreamContainer unpack_container(const ByteVec& bytes) {
  return unpack_container(bytes.data(), bytes.size());
}

}  // namespace pivotc

#endif  // PIVOTC_CONTAINER_HPP_

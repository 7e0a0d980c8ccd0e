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

#include "pivotc/container.hpp"

#include <string>

#include "pivotc/errors.hpp"

namespace pivotc {

namespace {

void validate(const BitstreamContainer& c) {
  if (!(c.n1_prime <= c.n1 && c.n1 <= c.n2 && c.n2 <= c.n))
    throw FormatError("container intervals violate n1' <= n1 <= n2 <= n: " +
                      std::to_string(c.n1_prime) + "," + std::to_string(c.n1) + "," +
                      std::to_string(c.n2) + "," + std::to_string(c.n));
  if (c.point_stage() != (c.n2 < c.n))
    throw FormatError("container flag bit0 inconsistent with n2/n");
  if (c.voxel_stage() != (c.n1 < c.n2))
    throw FormatError("container flag bit1 inconsistent with n1/n2");
  if (c.stage_counts.size() != static_cast<std::size_t>(c.n2 - c.n1))
    throw FormatError("container carries " + std::to_string(c.stage_counts.size()) +
                      " stage counts, expected " + std::to_string(c.n2 - c.n1));
}

}  // namespace

ByteVec pack_container(const BitstreamContainer& c) {
  validate(c);
  ByteVec out;
  out.reserve(32 + c.part_bytes.size() + c.feat_bytes.size());
  out.insert(out.end(), {'P', 'V', 'T', 'N'});
  put_u8(out, c.version);
  put_u8(out, c.n);
  put_u8(out, c.n1_prime);
  put_u8(out, c.n1);
  put_u8(out, c.n2);
  put_u8(out, c.flags);
  put_u64(out, c.num_points);
  put_u32(out, static_cast<std::uint32_t>(c.stage_counts.size()));
  for (std::uint32_t v : c.stage_counts) put_u32(out, v);
  put_u32(out, static_cast<std::uint32_t>(c.part_bytes.size()));
  out.insert(out.end(), c.part_bytes.begin(), c.part_bytes.end());
  put_u32(out, static_cast<std::uint32_t>(c.feat_bytes.size()));
  out.insert(out.end(), c.feat_bytes.begin(), c.feat_bytes.end());
  return out;
}

BitstreamContainer unpack_container(const std::uint8_t* data, std::size_t size) {
  ByteReader r(data, size, "PVTN container");
  if (r.str(4) != "PVTN") throw FormatError("bad container magic");
  BitstreamContainer c;
  c.version = r.u8();
  if (c.version != 1)
    throw FormatError("unsupported container version " + std::to_string(c.version));
  c.n = r.u8();
  c.n1_prime = r.u8();
  c.n1 = r.u8();
  c.n2 = r.u8();
  c.flags = r.u8();
  c.num_points = r.u64();
  const std::uint32_t n_stages = r.u32();
  c.stage_counts.reserve(n_stages);
  for (std::uint32_t i = 0; i < n_stages; ++i) c.stage_counts.push_back(r.u32());
  const std::uint32_t part_len = r.u32();
  c.part_bytes = r.bytes(part_len);
  const std::uint32_t feat_len = r.u32();
  c.feat_bytes = r.bytes(feat_len);
  if (r.remaining() != 0)
    throw FormatError("container has " + std::to_string(r.remaining()) +
                      " trailing bytes");
  validate(c);
  return c;
}

}  // namespace pivotc

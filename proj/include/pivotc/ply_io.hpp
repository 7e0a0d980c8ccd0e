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

#ifndef PIVOTC_PLY_IO_HPP_
#define PIVOTC_PLY_IO_HPP_

#include <string>
#include <vector>

#include "pivotc/point_cloud.hpp"

namespace pivotc {

enum class PlyFormat { kAscii, kBinary };

// Reads an ascii or binary_little_endian PLY with x, y, z vertex properties.
// Coordinates are rounded to the nearest integer, deduplicated and sorted.
// bit_depth: smallest depth covering the largest coordinate, unless
// bit_depth_override > 0. Non-finite or negative coordinates and malformed
// headers raise ParseError with the offending line or byte offset.
PointCloud read_ply(const std::string& path, int bit_depth_override = 0);

// Writes an integer cloud. read_ply(write_ply(pc)) == pc.
void write_ply(const PointCloud& pc, const std::string& path, PlyFormat format);

// Writes a real-coordinate set (reconstructions).
void write_ply(const std::vector<Vec3>& points, const std::string& path, PlyFormat format);

}  // namespace pivotc

#endif  // PIVOTC_PLY_IO_HPP_

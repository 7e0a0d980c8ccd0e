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

#include "pivotc/ply_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "pivotc/errors.hpp"

namespace pivotc {

namespace {

struct PlyProperty {
  std::string type;
  std::string name;
};

struct PlyHeader {
  bool binary = false;
  std::size_t vertex_count = 0;
  std::vector<PlyProperty> vertex_props;  // in declaration order
  std::size_t header_bytes = 0;
  int header_lines = 0;
};

std::size_t type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
      t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

double read_binary_value(const std::uint8_t* p, const std::string& t) {
  auto load = [&]<typename T>() {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  if (t == "float" || t == "float32") return load.operator()<float>();
  if (t == "double" || t == "float64") return load.operator()<double>();
  if (t == "char" || t == "int8") return load.operator()<std::int8_t>();
  if (t == "uchar" || t == "uint8") return load.operator()<std::uint8_t>();
  if (t == "short" || t == "int16") return load.operator()<std::int16_t>();
  if (t == "ushort" || t == "uint16") return load.operator()<std::uint16_t>();
  if (t == "int" || t == "int32") return load.operator()<std::int32_t>();
  return load.operator()<std::uint32_t>();
}

PlyHeader parse_header(std::istream& in, const std::string& path) {
  PlyHeader h;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": " + msg);
  };
  auto next_line = [&]() {
    if (!std::getline(in, line)) fail("unexpected end of header");
    h.header_bytes += line.size() + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };

  next_line();
  if (line != "ply") fail("not a PLY file (missing 'ply' magic)");
  bool in_vertex = false;
  bool saw_format = false;
  while (true) {
    next_line();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment" || tok == "obj_info" || tok.empty()) continue;
    if (tok == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii")
        h.binary = false;
      else if (fmt == "binary_little_endian")
        h.binary = true;
      else
        fail("unsupported format '" + fmt + "'");
      saw_format = true;
    } else if (tok == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (!ls && name.empty()) fail("malformed element line");
      if (name == "vertex") {
        h.vertex_count = count;
        in_vertex = true;
      } else {
        if (count != 0) fail("unsupported non-empty element '" + name + "'");
        in_vertex = false;
      }
    } else if (tok == "property") {
      if (!in_vertex) continue;
      PlyProperty p;
      ls >> p.type >> p.name;
      if (p.type == "list") fail("list property on vertex element is unsupported");
      if (type_size(p.type) == 0) fail("unknown property type '" + p.type + "'");
      h.vertex_props.push_back(p);
    } else if (tok == "end_header") {
      break;
    } else {
      fail("unknown header keyword '" + tok + "'");
    }
  }
  if (!saw_format) fail("missing format line");
  h.header_lines = line_no;
  return h;
}

}  // namespace

PointCloud read_ply(const std::string& path, int bit_depth_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  PlyHeader h = parse_header(in, path);

  int ix = -1, iy = -1, iz = -1;
  for (std::size_t i = 0; i < h.vertex_props.size(); ++i) {
    if (h.vertex_props[i].name == "x") ix = static_cast<int>(i);
    if (h.vertex_props[i].name == "y") iy = static_cast<int>(i);
    if (h.vertex_props[i].name == "z") iz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0)
    throw ParseError(path + ": vertex element lacks x/y/z properties");

  std::vector<Coord> coords;
  coords.reserve(h.vertex_count);
  std::uint32_t max_c = 0;
  auto accept = [&](double x, double y, double z, const std::string& where) {
    const double v[3] = {x, y, z};
    Coord c;
    for (int a = 0; a < 3; ++a) {
      if (!std::isfinite(v[a]))
        throw ParseError(path + ":" + where + ": non-finite coordinate");
      const double r = std::round(v[a]);
      if (r < 0.0) throw ParseError(path + ":" + where + ": negative coordinate");
      if (r > 4294967295.0) throw ParseError(path + ":" + where + ": coordinate too large");
      c[a] = static_cast<std::uint32_t>(r);
      max_c = std::max(max_c, c[a]);
    }
    coords.push_back(c);
  };

  if (!h.binary) {
    std::string line;
    int line_no = h.header_lines;
    for (std::size_t v = 0; v < h.vertex_count; ++v) {
      if (!std::getline(in, line))
        throw ParseError(path + ": vertex data ends after " + std::to_string(v) +
                         " of " + std::to_string(h.vertex_count) + " vertices");
      ++line_no;
      std::istringstream ls(line);
      std::vector<double> vals(h.vertex_props.size());
      for (std::size_t p = 0; p < h.vertex_props.size(); ++p) {
        if (!(ls >> vals[p]))
          throw ParseError(path + ":" + std::to_string(line_no) + ": malformed vertex row");
      }
      accept(vals[ix], vals[iy], vals[iz], std::to_string(line_no));
    }
  } else {
    std::size_t stride = 0;
    std::vector<std::size_t> offsets(h.vertex_props.size());
    for (std::size_t p = 0; p < h.vertex_props.size(); ++p) {
      offsets[p] = stride;
      stride += type_size(h.vertex_props[p].type);
    }
    std::vector<std::uint8_t> row(stride);
    for (std::size_t v = 0; v < h.vertex_count; ++v) {
      in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(stride));
      if (static_cast<std::size_t>(in.gcount()) != stride)
        throw ParseError(path + ": truncated binary payload at byte offset " +
                         std::to_string(h.header_bytes + v * stride));
      const std::string where = "offset " + std::to_string(h.header_bytes + v * stride);
      accept(read_binary_value(row.data() + offsets[ix], h.vertex_props[ix].type),
             read_binary_value(row.data() + offsets[iy], h.vertex_props[iy].type),
             read_binary_value(row.data() + offsets[iz], h.vertex_props[iz].type), where);
    }
  }

  int bits = bit_depth_override;
  if (bits <= 0) {
    bits = 1;
    while (max_c > ((1ull << bits) - 1)) ++bits;
  }
  return dedup_sort(std::move(coords), bits);
}

namespace {

void write_ply_impl(const std::vector<Vec3>& pts, bool integer_valued,
                    const std::string& path, PlyFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "ply\n"
      << (format == PlyFormat::kAscii ? "format ascii 1.0\n"
                                      : "format binary_little_endian 1.0\n")
      << "element vertex " << pts.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "end_header\n";
  if (format == PlyFormat::kAscii) {
    char buf[128];
    for (const Vec3& p : pts) {
      if (integer_valued)
        std::snprintf(buf, sizeof(buf), "%.0f %.0f %.0f\n", p[0], p[1], p[2]);
      else
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p[0], p[1], p[2]);
      out << buf;
    }
  } else {
    for (const Vec3& p : pts) {
      float v[3] = {static_cast<float>(p[0]), static_cast<float>(p[1]),
                    static_cast<float>(p[2])};
      out.write(reinterpret_cast<const char*>(v), sizeof(v));
    }
  }
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace

void write_ply(const PointCloud& pc, const std::string& path, PlyFormat format) {
  std::vector<Vec3> pts;
  pts.reserve(pc.size());
  for (const Coord& c : pc.points)
    pts.push_back({static_cast<double>(c[0]), static_cast<double>(c[1]),
                   static_cast<double>(c[2])});
  write_ply_impl(pts, true, path, format);
}

void write_ply(const std::vector<Vec3>& points, const std::string& path, PlyFormat format) {
  write_ply_impl(points, false, path, format);
}

}  // namespace pivotc

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

#ifndef PIVOTC_BYTES_HPP_
#define PIVOTC_BYTES_HPP_

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "pivotc/errors.hpp"

namespace pivotc {

using ByteVec = std::vector<std::uint8_t>;

// Little-endian append helpers. All container and checkpoint integers go
// through these so the on-disk layout is independent of host endianness.
inline void put_u8(ByteVec& out, std::uint8_t v) { out.push_back(v); }

inline void put_u16(ByteVec& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(ByteVec& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(ByteVec& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(ByteVec& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

// Sequential little-endian reader with bounds checking.
class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size, std::string what)
      : data_(data), size_(size), pos_(0), what_(std::move(what)) {}
  explicit ByteReader(const ByteVec& bytes, std::string what = "buffer")
      : ByteReader(bytes.data(), bytes.size(), std::move(what)) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }

  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(data_[pos_]) |
                      static_cast<std::uint16_t>(data_[pos_ + 1]) << 8;
    pos_ += 2;
    return v;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  ByteVec bytes(std::size_t n) {
    need(n);
    ByteVec v(data_ + pos_, data_ + pos_ + n);
    pos_ += n;
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string v(reinterpret_cast<const char*>(data_) + pos_, n);
    pos_ += n;
    return v;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_)
      throw FormatError(what_ + ": truncated at byte " + std::to_string(pos_) +
                        " (need " + std::to_string(n) + ", have " +
                        std::to_string(size_ - pos_) + ")");
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_;
  std::string what_;
};

}  // namespace pivotc

#endif  // PIVOTC_BYTES_HPP_

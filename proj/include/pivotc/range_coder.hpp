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

#ifndef PIVOTC_RANGE_CODER_HPP_
#define PIVOTC_RANGE_CODER_HPP_

#include <cstdint>
#include <vector>

#include "pivotc/bytes.hpp"
#include "pivotc/errors.hpp"

namespace pivotc {

// Adaptive binary probability model: Krichevsky-Trofimov-style counts with
// halving once c0 + c1 exceeds kHalveAt. Counts never drop below 1, so the
// coded probability stays inside (0, 1).
class AdaptiveBitModel {
 public:
  // Probability of a 1 bit quantized to 16-bit precision, in [1, 65535].
  // Integer arithmetic only; identical on every platform.
  std::uint32_t p1_q16() const {
    std::uint32_t f1 = (c1_ << 16) / (c0_ + c1_);
    if (f1 < 1) f1 = 1;
    if (f1 > 65535) f1 = 65535;
    return f1;
  }

  void update(int bit) {
    if (bit)
      ++c1_;
    else
      ++c0_;
    if (c0_ + c1_ > kHalveAt) {
      c0_ = (c0_ + 1) >> 1;
      c1_ = (c1_ + 1) >> 1;
    }
  }

  std::uint32_t c0() const { return c0_; }
  std::uint32_t c1() const { return c1_; }

  static constexpr std::uint32_t kHalveAt = 1024;

 private:
  std::uint32_t c0_ = 1;
  std::uint32_t c1_ = 1;
};

// Static cumulative-frequency table for multi-symbol coding.
// total() must not exceed 2^16. Symbols with zero frequency are
// representable but coding one raises ModelError.
class FrequencyTable {
 public:
  // freqs[i] is the weight of symbol i; the table is static (no adaptation).
  explicit FrequencyTable(const std::vector<std::uint32_t>& freqs);

  std::uint32_t size() const { return static_cast<std::uint32_t>(cum_.size() - 1); }
  std::uint32_t total() const { return cum_.back(); }
  std::uint32_t cum_lo(std::uint32_t sym) const { return cum_[sym]; }
  std::uint32_t freq(std::uint32_t sym) const { return cum_[sym + 1] - cum_[sym]; }

  // Largest symbol with cum_lo(sym) <= value; value must be < total().
  std::uint32_t find(std::uint32_t value) const;

 private:
  std::vector<std::uint32_t> cum_;  // size() + 1 entries, cum_[0] = 0
};

// Byte-oriented range encoder: 64-bit low for carry propagation, 32-bit
// range, renormalization one byte at a time whenever range < 2^24.
// The first output byte of every stream is a zero pad consumed by the
// decoder's init; flush appends a fixed 5-byte tail.
class RangeEncoder {
 public:
  // Encodes a symbol occupying [cum_lo, cum_lo + freq) out of [0, total).
  // The topmost symbol absorbs the division slack so no probability mass
  // is wasted on the dominant symbol. freq must be >= 1, total <= 2^16.
  void encode(std::uint32_t cum_lo, std::uint32_t freq, std::uint32_t total);

  void encode_bit(AdaptiveBitModel& model, int bit) {
    const std::uint32_t f1 = model.p1_q16();
    const std::uint32_t f0 = (1u << 16) - f1;
    if (bit)
      encode(f0, f1, 1u << 16);
    else
      encode(0, f0, 1u << 16);
    model.update(bit);
  }

  void encode_symbol(const FrequencyTable& table, std::uint32_t sym);

  // Terminates the stream. No further encode calls are valid.
  ByteVec finish();

  std::size_t bytes_pending() const { return out_.size(); }

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xffffffffu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  ByteVec out_;
};

// Mirror of RangeEncoder. Reading past the payload raises CodecError.
class RangeDecoder {
 public:
  explicit RangeDecoder(const std::uint8_t* data, std::size_t size);
  explicit RangeDecoder(const ByteVec& bytes) : RangeDecoder(bytes.data(), bytes.size()) {}

  // Returns the cumulative value in [0, total) addressed by the stream;
  // caller maps it to a symbol, then commits with consume().
  std::uint32_t decode_target(std::uint32_t total);
  void consume(std::uint32_t cum_lo, std::uint32_t freq, std::uint32_t total);

  int decode_bit(AdaptiveBitModel& model) {
    const std::uint32_t f1 = model.p1_q16();
    const std::uint32_t f0 = (1u << 16) - f1;
    const std::uint32_t v = decode_target(1u << 16);
    int bit = v >= f0;
    if (bit)
      consume(f0, f1, 1u << 16);
    else
      consume(0, f0, 1u << 16);
    model.update(bit);
    return bit;
  }

  std::uint32_t decode_symbol(const FrequencyTable& table);

 private:
  std::uint8_t next_byte();

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::uint64_t code_ = 0;
  std::uint32_t range_ = 0xffffffffu;
  std::uint32_t r_ = 0;  // range / total of the pending decode_target
};

}  // namespace pivotc

#endif  // PIVOTC_RANGE_CODER_HPP_

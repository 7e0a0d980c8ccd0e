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

#include "pivotc/range_coder.hpp"

#include <algorithm>
#include <string>

namespace pivotc {

namespace {
constexpr std::uint32_t kTopValue = 1u << 24;
constexpr std::uint32_t kMaxTotal = 1u << 16;
}  // namespace

FrequencyTable::FrequencyTable(const std::vector<std::uint32_t>& freqs) {
  if (freqs.empty()) throw ModelError("frequency table needs at least one symbol");
  cum_.resize(freqs.size() + 1);
  cum_[0] = 0;
  for (std::size_t i = 0; i < freqs.size(); ++i) cum_[i + 1] = cum_[i] + freqs[i];
  if (cum_.back() == 0) throw ModelError("frequency table has zero total");
  if (cum_.back() > kMaxTotal)
    throw ModelError("frequency table total " + std::to_string(cum_.back()) +
                     " exceeds 2^16");
}

std::uint32_t FrequencyTable::find(std::uint32_t value) const {
  // First entry strictly greater than value, minus one; zero-width
  // intervals (zero-frequency symbols) are skipped automatically.
  auto it = std::upper_bound(cum_.begin(), cum_.end(), value);
  return static_cast<std::uint32_t>(it - cum_.begin()) - 1;
}

void RangeEncoder::encode(std::uint32_t cum_lo, std::uint32_t freq, std::uint32_t total) {
  const std::uint32_t r = range_ / total;
  low_ += static_cast<std::uint64_t>(r) * cum_lo;
  if (cum_lo + freq == total)
    range_ -= r * cum_lo;  // top symbol absorbs the division slack
  else
    range_ = r * freq;
  while (range_ < kTopValue) {
    shift_low();
    range_ <<= 8;
  }
}

void RangeEncoder::encode_symbol(const FrequencyTable& table, std::uint32_t sym) {
  if (sym >= table.size())
    throw ModelError("symbol " + std::to_string(sym) + " outside alphabet of " +
                     std::to_string(table.size()));
  const std::uint32_t f = table.freq(sym);
  if (f == 0) throw ModelError("cannot encode zero-frequency symbol " + std::to_string(sym));
  encode(table.cum_lo(sym), f, table.total());
}

void RangeEncoder::shift_low() {
  // Carry is resolved once the top byte of low can no longer change:
  // either low < 0xff000000 (no pending 0xff run can overflow) or an
  // explicit carry bit is present in bits [32, 40).
  if (static_cast<std::uint32_t>(low_) < 0xff000000u || (low_ >> 32) != 0) {
    const std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t byte = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(byte + carry));
      byte = 0xff;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00ffffffull) << 8;
}

ByteVec RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(const std::uint8_t* data, std::size_t size)
    : data_(data), size_(size) {
  // The first byte is the encoder's zero pad; folding it into the 32-bit
  // window shifts it straight back out.
  for (int i = 0; i < 5; ++i) code_ = ((code_ << 8) | next_byte()) & 0xffffffffull;
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= size_) throw CodecError("range decoder read past end of stream");
  return data_[pos_++];
}

std::uint32_t RangeDecoder::decode_target(std::uint32_t total) {
  r_ = range_ / total;
  std::uint32_t v = static_cast<std::uint32_t>(code_ / r_);
  return std::min(v, total - 1);
}

void RangeDecoder::consume(std::uint32_t cum_lo, std::uint32_t freq, std::uint32_t total) {
  code_ -= static_cast<std::uint64_t>(r_) * cum_lo;
  if (cum_lo + freq == total)
    range_ -= r_ * cum_lo;
  else
    range_ = r_ * freq;
  while (range_ < kTopValue) {
    code_ = ((code_ << 8) | next_byte()) & 0xffffffffull;
    range_ <<= 8;
  }
}

std::uint32_t RangeDecoder::decode_symbol(const FrequencyTable& table) {
  const std::uint32_t v = decode_target(table.total());
  const std::uint32_t sym = table.find(v);
  consume(table.cum_lo(sym), table.freq(sym), table.total());
  return sym;
}

}  // namespace pivotc

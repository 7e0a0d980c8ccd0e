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

#include <cmath>
#include <vector>

#include <doctest.h>

#include "pivotc/range_coder.hpp"
#include "pivotc/rng.hpp"

using namespace pivotc;

TEST_CASE("binary roundtrip of random bits") {
  Rng rng(1);
  std::vector<int> bits;
  for (int i = 0; i < 10000; ++i) bits.push_back(static_cast<int>(rng.next_below(2)));

  RangeEncoder enc;
  AdaptiveBitModel enc_model;
  for (int b : bits) enc.encode_bit(enc_model, b);
  ByteVec coded = enc.finish();

  RangeDecoder dec(coded);
  AdaptiveBitModel dec_model;
  for (int b : bits) CHECK(dec.decode_bit(dec_model) == b);
}

TEST_CASE("adaptive coding of skewed bits approaches the entropy oracle") {
  // Oracle: ideal code length -sum log2 p(x_i) under the true source,
  // accumulated alongside generation.
  for (double p1 : {0.1, 0.5, 0.9}) {
    Rng rng(42);
    std::vector<int> bits;
    double oracle_bits = 0;
    for (int i = 0; i < 1000000; ++i) {
      const int b = rng.next_double() < p1 ? 1 : 0;
      bits.push_back(b);
      oracle_bits += -std::log2(b ? p1 : 1.0 - p1);
    }
    RangeEncoder enc;
    AdaptiveBitModel model;
    for (int b : bits) enc.encode_bit(model, b);
    ByteVec coded = enc.finish();
    const double coded_bits = 8.0 * static_cast<double>(coded.size());
    INFO("p1 = " << p1 << " coded " << coded_bits << " oracle " << oracle_bits);
    CHECK(coded_bits <= oracle_bits * 1.02 + 16 * 8);
    // decode must replay exactly
    RangeDecoder dec(coded);
    AdaptiveBitModel dmodel;
    bool all = true;
    for (int b : bits) all = all && (dec.decode_bit(dmodel) == b);
    CHECK(all);
  }
}

TEST_CASE("all-zero bits collapse to a few bytes") {
  RangeEncoder enc;
  AdaptiveBitModel model;
  for (int i = 0; i < 10000; ++i) enc.encode_bit(model, 0);
  ByteVec coded = enc.finish();
  CHECK(coded.size() < 200);
}

TEST_CASE("flush tail is at most 8 bytes") {
  RangeEncoder empty;
  CHECK(empty.finish().size() <= 8);

  // tail after payload: size delta between pre-flush and post-flush
  RangeEncoder enc;
  AdaptiveBitModel model;
  for (int i = 0; i < 1000; ++i) enc.encode_bit(model, i % 3 == 0);
  const std::size_t before = enc.bytes_pending();
  const std::size_t total = enc.finish().size();
  CHECK(total - before <= 8);
}

TEST_CASE("uniform 256-symbol table codes at 8 bits per symbol") {
  FrequencyTable table(std::vector<std::uint32_t>(256, 256));
  Rng rng(9);
  std::vector<std::uint32_t> syms;
  for (int i = 0; i < 10000; ++i) syms.push_back(static_cast<std::uint32_t>(rng.next_below(256)));
  RangeEncoder enc;
  for (auto s : syms) enc.encode_symbol(table, s);
  ByteVec coded = enc.finish();
  CHECK(coded.size() >= 9900);
  CHECK(coded.size() <= 10100);
  RangeDecoder dec(coded);
  for (auto s : syms) CHECK(dec.decode_symbol(table) == s);
}

TEST_CASE("single-symbol alphabet costs nothing beyond the flush") {
  FrequencyTable table(std::vector<std::uint32_t>{7});
  RangeEncoder enc;
  for (int i = 0; i < 5000; ++i) enc.encode_symbol(table, 0);
  ByteVec coded = enc.finish();
  CHECK(coded.size() <= 8);
  RangeDecoder dec(coded);
  for (int i = 0; i < 5000; ++i) CHECK(dec.decode_symbol(table) == 0);
}

TEST_CASE("skewed static table stays within 3 percent of cross entropy") {
  const double p0 = 0.99;
  std::vector<std::uint32_t> freqs = {
      static_cast<std::uint32_t>(p0 * 65536), 65536 - static_cast<std::uint32_t>(p0 * 65536)};
  FrequencyTable table(freqs);
  Rng rng(1234);
  std::vector<std::uint32_t> syms;
  double oracle_bits = 0;
  for (int i = 0; i < 200000; ++i) {
    const std::uint32_t s = rng.next_double() < p0 ? 0 : 1;
    syms.push_back(s);
    oracle_bits += -std::log2(s == 0 ? p0 : 1 - p0);
  }
  RangeEncoder enc;
  for (auto s : syms) enc.encode_symbol(table, s);
  ByteVec coded = enc.finish();
  CHECK(8.0 * static_cast<double>(coded.size()) <= oracle_bits * 1.03 + 16 * 8);
  RangeDecoder dec(coded);
  for (auto s : syms) CHECK(dec.decode_symbol(table) == s);
}

TEST_CASE("zero-frequency symbols are rejected") {
  FrequencyTable table(std::vector<std::uint32_t>{10, 0, 4});
  RangeEncoder enc;
  CHECK_THROWS_AS(enc.encode_symbol(table, 1), ModelError);
  CHECK_NOTHROW(enc.encode_symbol(table, 2));
}

TEST_CASE("interleaved binary and multi-symbol streams roundtrip") {
  Rng rng(77);
  FrequencyTable table(std::vector<std::uint32_t>{5, 1, 9, 100, 3});
  // op: 0 => bit with model A, 1 => bit with model B, 2 => symbol
  std::vector<int> ops, payload;
  for (int i = 0; i < 20000; ++i) {
    const int op = static_cast<int>(rng.next_below(3));
    ops.push_back(op);
    if (op == 2) {
      std::uint32_t s = static_cast<std::uint32_t>(rng.next_below(5));
      if (table.freq(s) == 0) s = 3;
      payload.push_back(static_cast<int>(s));
    } else {
      payload.push_back(static_cast<int>(rng.next_below(2)));
    }
  }
  RangeEncoder enc;
  AdaptiveBitModel ma, mb;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (ops[i] == 0)
      enc.encode_bit(ma, payload[i]);
    else if (ops[i] == 1)
      enc.encode_bit(mb, payload[i]);
    else
      enc.encode_symbol(table, static_cast<std::uint32_t>(payload[i]));
  }
  ByteVec coded = enc.finish();
  RangeDecoder dec(coded);
  AdaptiveBitModel da, db;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    int got;
    if (ops[i] == 0)
      got = dec.decode_bit(da);
    else if (ops[i] == 1)
      got = dec.decode_bit(db);
    else
      got = static_cast<int>(dec.decode_symbol(table));
    CHECK(got == payload[i]);
  }
}

TEST_CASE("decoding a truncated stream throws") {
  RangeEncoder enc;
  AdaptiveBitModel model;
  for (int i = 0; i < 4000; ++i) enc.encode_bit(model, i & 1);
  ByteVec coded = enc.finish();
  coded.resize(coded.size() / 4);
  RangeDecoder dec(coded);
  AdaptiveBitModel dmodel;
  CHECK_THROWS_AS(
      [&] {
        for (int i = 0; i < 4000; ++i) dec.decode_bit(dmodel);
      }(),
      CodecError);
}

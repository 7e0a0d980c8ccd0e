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

#ifndef PIVOTC_BOTTLENECK_HPP_
#define PIVOTC_BOTTLENECK_HPP_

#include <cstdint>
#include <vector>

#include "pivotc/bytes.hpp"
#include "pivotc/nn.hpp"
#include "pivotc/range_coder.hpp"
#include "pivotc/tensor.hpp"

namespace pivotc {

// Factorized entropy model: one univariate monotone density network per
// channel (widths 1 -> 3 -> 3 -> 1) defining CDF_c. Layers use positive
// weights via softplus and gated-tanh perturbations, so the CDF is strictly
// increasing with limits 0 and 1; PMF(q) = CDF(q+0.5) - CDF(q-0.5) is
// positive everywhere on the integer support [-64, 63].
class EntropyBottleneck {
 public:
  static constexpr int kSupportMin = -64;
  static constexpr int kSupportMax = 63;
  static constexpr int kSymbols = 128;

  EntropyBottleneck() = default;
  static EntropyBottleneck init(int channels, Rng& rng);

  int channels() const { return channels_; }

  // CDF of every entry of x, evaluated per channel: x is (N x C), result
  // (N x C). Differentiable in both x and the density parameters.
  ad::Tensor cdf(const ad::Tensor& x) const;

  // Total estimated bits of the (noisy or rounded) latents:
  // sum of -log2(CDF(y + 0.5) - CDF(y - 0.5)).
  ad::Tensor bits_estimate(const ad::Tensor& y) const;

  // Rounds and clamps latents to the integer support.
  std::vector<std::int32_t> quantize_latents(const ad::Tensor& y) const;

  // Entropy-codes quantized latents (row-major, per-channel tables).
  ByteVec encode(const std::vector<std::int32_t>& q, int num_rows) const;
  std::vector<std::int32_t> decode(const ByteVec& bytes, int num_rows) const;

  // Model's own cross-entropy for the quantized latents, in bits.
  double cross_entropy_bits(const std::vector<std::int32_t>& q, int num_rows) const;

  // Throws ModelError if any CDF is non-finite or non-monotone.
  void validate() const;

  void register_params(const std::string& prefix, ParamList& out) const;

 private:
  // Per-channel parameters stacked row-wise (channel c = row c).
  ad::Tensor h1_, b1_, a1_;  // (C x 3), (C x 3), (C x 3)
  ad::Tensor h2_, b2_, a2_;  // (C x 9), (C x 3), (C x 3)
  ad::Tensor h3_, b3_;       // (C x 3), (C x 1)
  int channels_ = 0;

  ad::Tensor cdf_channel(const ad::Tensor& col, int c) const;  // (N x 1)
  // Per-channel PMF over the integer support, double precision.
  std::vector<double> pmf_channel(int c) const;
  FrequencyTable table_channel(int c) const;
};

}  // namespace pivotc

#endif  // PIVOTC_BOTTLENECK_HPP_

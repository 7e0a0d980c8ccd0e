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

#ifndef PIVOTC_NN_HPP_
#define PIVOTC_NN_HPP_

#include <string>
#include <vector>

#include "pivotc/sparse_tensor.hpp"
#include "pivotc/tensor.hpp"

namespace pivotc {

struct NamedParam {
  std::string name;
  ad::Tensor tensor;
};

using ParamList = std::vector<NamedParam>;

struct Linear {
  ad::Tensor w;  // (in x out)
  ad::Tensor b;  // (1 x out)

  static Linear init(int in, int out, Rng& rng) {
    Linear l;
    l.w = ad::Tensor::kaiming(in, out, in, rng);
    l.b = ad::Tensor::zeros(1, out, true);
    return l;
  }

  ad::Tensor forward(const ad::Tensor& x) const {
    return ad::add_rowwise(ad::matmul(x, w), b);
  }

  void register_params(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
  }
};

// Two-layer perceptron with a ReLU between the layers.
struct Mlp2 {
  Linear l1, l2;

  static Mlp2 init(int in, int hidden, int out, Rng& rng) {
    return Mlp2{Linear::init(in, hidden, rng), Linear::init(hidden, out, rng)};
  }

  ad::Tensor forward(const ad::Tensor& x) const {
    return l2.forward(ad::relu(l1.forward(x)));
  }

  void register_params(const std::string& prefix, ParamList& out) const {
    l1.register_params(prefix + ".l1", out);
    l2.register_params(prefix + ".l2", out);
  }
};

// Weights of one sparse convolution (taps = 27 for 3^3, 8 for stride 2 / up).
struct ConvParams {
  ad::Tensor w;  // (taps*C_in x C_out), or (C_in x 8*C_out) for upsampling
  ad::Tensor b;

  static ConvParams init(int taps, int cin, int cout, Rng& rng) {
    ConvParams p;
    p.w = ad::Tensor::kaiming(taps * cin, cout, taps * cin, rng);
    p.b = ad::Tensor::zeros(1, cout, true);
    return p;
  }

  static ConvParams init_upsample(int cin, int cout, Rng& rng) {
    ConvParams p;
    p.w = ad::Tensor::kaiming(cin, 8 * cout, cin, rng);
    p.b = ad::Tensor::zeros(1, 8 * cout, true);
    return p;
  }

  void register_params(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
  }
};

// conv3 -> relu -> conv3 with a skip connection.
struct ResBlock {
  ConvParams c1, c2;

  static ResBlock init(int channels, Rng& rng) {
    return ResBlock{ConvParams::init(27, channels, channels, rng),
                    ConvParams::init(27, channels, channels, rng)};
  }

  SparseTensor forward(const SparseTensor& t) const {
    SparseTensor h = sparse_conv(t, c1.w, c1.b);
    h.feats = ad::relu(h.feats);
    h = sparse_conv(h, c2.w, c2.b);
    h.feats = ad::add(h.feats, t.feats);
    return h;
  }

  void register_params(const std::string& prefix, ParamList& out) const {
    c1.register_params(prefix + ".c1", out);
    c2.register_params(prefix + ".c2", out);
  }
};

// Stride-2 downscaling followed by two residual aggregation blocks.
struct DownscaleBlock {
  ConvParams stride;
  ResBlock r1, r2;

  static DownscaleBlock init(int cin, int cout, Rng& rng) {
    return DownscaleBlock{ConvParams::init(8, cin, cout, rng), ResBlock::init(cout, rng),
                          ResBlock::init(cout, rng)};
  }

  SparseTensor forward(const SparseTensor& t) const {
    SparseTensor h = downscale2_conv(t, stride.w, stride.b);
    h = r1.forward(h);
    h = r2.forward(h);
    return h;
  }

  void register_params(const std::string& prefix, ParamList& out) const {
    stride.register_params(prefix + ".stride", out);
    r1.register_params(prefix + ".r1", out);
    r2.register_params(prefix + ".r2", out);
  }
};

}  // namespace pivotc

#endif  // PIVOTC_NN_HPP_

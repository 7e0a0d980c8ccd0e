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

#ifndef PIVOTC_CONFIG_HPP_
#define PIVOTC_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pivotc {

// Architecture knobs of the learned stages.
struct StageConfig {
  int c_point = 64;    // point-analysis feature width
  int c_voxel = 64;    // voxel-domain feature width
  int c_latent = 32;   // entropy-coded latent width
  int k_synth = 4;     // points generated per voxel at synthesis
  int k_group = 16;    // set-abstraction group size
  int k_attn = 16;     // attention neighbors
  double gamma = 1.5;  // synthesis offset scale
  double attn_c = 1.0; // attention logit scaling constant
};

struct LossConfig {
  double lambda = 0.01;  // rate weight
  double alpha = 1.0;    // Chamfer weight
  double beta = 1.0;     // BCE weight
};

// One rate point: bit-interval endpoints plus the architecture and loss
// configuration. Intervals follow the [c, m, f] convention: c = n1 coarse
// octree bits, m = n2 - n1 voxel bits, f = n - n2 point bits.
struct CodecConfig {
  int n = 8;
  int n1_prime = 4;
  int n1 = 5;
  int n2 = 6;
  StageConfig stage;
  LossConfig loss;

  bool point_stage() const { return n2 < n; }
  bool voxel_stage() const { return n1 < n2; }
  bool learned() const { return point_stage() || voxel_stage(); }

  std::uint32_t s1() const { return 1u << (n - n2); }
  std::uint32_t s2() const { return 1u << (n2 - n1); }
  std::uint32_t s3() const { return 1u << (n1 - n1_prime); }

  // Throws ConfigError when the intervals are inconsistent.
  void validate() const;

  // Builds a config from [c, m, f]; the feature map sits one level below
  // the octree (n1 - n1' = 1) whenever a learned stage is active.
  static CodecConfig from_triple(int n, int c, int m, int f);
};

struct TrainConfig {
  int epochs = 50;
  double lr = 8e-4;
  int batch_size = 8;
  int steps_per_epoch = 8;
  std::uint64_t seed = 1;
  // Synthetic dataset spec (used when dataset_dir is empty).
  std::string shape = "sphere";
  int bits = 8;
  int points = 2000;
  std::string dataset_dir;  // directory of .ply files, overrides synthetic
  std::vector<double> lambda_grid;  // candidate rate weights for sweeps

  void validate() const;
};

// Plain-text key=value configuration file: one key per line, '#' comments,
// blank lines ignored. Unknown keys raise ConfigError.
struct ConfigFile {
  CodecConfig codec;
  TrainConfig train;
};

ConfigFile parse_config_file(const std::string& path);
// Parses from the given text (path only labels error messages).
ConfigFile parse_config_text(const std::string& text, const std::string& path = "<config>");

}  // namespace pivotc

#endif  // PIVOTC_CONFIG_HPP_

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

#include "pivotc/config.hpp"

#include <fstream>
#include <sstream>

#include "pivotc/errors.hpp"

namespace pivotc {

void CodecConfig::validate() const {
  if (n < 1 || n > 21) throw ConfigError("bit depth n must be in [1, 21], got " + std::to_string(n));
  if (!(0 <= n1_prime && n1_prime <= n1 && n1 <= n2 && n2 <= n))
    throw ConfigError("intervals must satisfy 0 <= n1' <= n1 <= n2 <= n, got " +
                      std::to_string(n1_prime) + "," + std::to_string(n1) + "," +
                      std::to_string(n2) + "," + std::to_string(n));
  if (n1 < 1) throw ConfigError("the octree stage needs at least one bit (n1 >= 1)");
  if (learned() && n1_prime >= n1)
    throw ConfigError("learned stages require n1' < n1 for the feature map");
  if (!learned() && n1_prime != n1)
    throw ConfigError("pure octree configuration must have n1' == n1");
  if (stage.c_point < 1 || stage.c_voxel < 1 || stage.c_latent < 1)
    throw ConfigError("channel widths must be positive");
  if (stage.k_synth < 1 || stage.k_group < 1 || stage.k_attn < 1)
    throw ConfigError("k_synth, k_group and k_attn must be positive");
  if (stage.gamma <= 0 || stage.attn_c <= 0)
    throw ConfigError("gamma and attn_c must be positive");
  if (loss.lambda <= 0 || loss.alpha <= 0 || loss.beta <= 0)
    throw ConfigError("loss weights must be positive");
}

CodecConfig CodecConfig::from_triple(int n, int c, int m, int f) {
  if (c + m + f != n)
    throw ConfigError("triple [" + std::to_string(c) + "," + std::to_string(m) + "," +
                      std::to_string(f) + "] does not sum to n = " + std::to_string(n));
  CodecConfig cfg;
  cfg.n = n;
  cfg.n1 = c;
  cfg.n2 = c + m;
  cfg.n1_prime = (m + f > 0) ? c - 1 : c;
  cfg.validate();
  return cfg;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (lr <= 0) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (steps_per_epoch < 1) throw ConfigError("steps_per_epoch must be >= 1");
  if (points < 1) throw ConfigError("points must be >= 1");
  if (bits < 1 || bits > 18) throw ConfigError("bits must be in [1, 18]");
}

namespace {

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  }
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace

ConfigFile parse_config_text(const std::string& text, const std::string& path) {
  ConfigFile cfg;
  int c = -1, m = -1, f = -1;  // optional triple form
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "n") cfg.codec.n = to_int(key, val);
    else if (key == "c") c = to_int(key, val);
    else if (key == "m") m = to_int(key, val);
    else if (key == "f") f = to_int(key, val);
    else if (key == "n1") cfg.codec.n1 = to_int(key, val);
    else if (key == "n2") cfg.codec.n2 = to_int(key, val);
    else if (key == "n1_prime") cfg.codec.n1_prime = to_int(key, val);
    else if (key == "c_point") cfg.codec.stage.c_point = to_int(key, val);
    else if (key == "c_voxel") cfg.codec.stage.c_voxel = to_int(key, val);
    else if (key == "c_latent") cfg.codec.stage.c_latent = to_int(key, val);
    else if (key == "k_synth") cfg.codec.stage.k_synth = to_int(key, val);
    else if (key == "k_group") cfg.codec.stage.k_group = to_int(key, val);
    else if (key == "k_attn") cfg.codec.stage.k_attn = to_int(key, val);
    else if (key == "gamma") cfg.codec.stage.gamma = to_double(key, val);
    else if (key == "attn_c") cfg.codec.stage.attn_c = to_double(key, val);
    else if (key == "lambda") cfg.codec.loss.lambda = to_double(key, val);
    else if (key == "alpha") cfg.codec.loss.alpha = to_double(key, val);
    else if (key == "beta") cfg.codec.loss.beta = to_double(key, val);
    else if (key == "epochs") cfg.train.epochs = to_int(key, val);
    else if (key == "lr") cfg.train.lr = to_double(key, val);
    else if (key == "batch_size") cfg.train.batch_size = to_int(key, val);
    else if (key == "steps_per_epoch") cfg.train.steps_per_epoch = to_int(key, val);
    else if (key == "seed") cfg.train.seed = static_cast<std::uint64_t>(to_int(key, val));
    else if (key == "shape") cfg.train.shape = val;
    else if (key == "bits") cfg.train.bits = to_int(key, val);
    else if (key == "points") cfg.train.points = to_int(key, val);
    else if (key == "dataset_dir") cfg.train.dataset_dir = val;
    else if (key == "lambda_grid") {
      std::istringstream ls(val);
      std::string item;
      while (std::getline(ls, item, ','))
        cfg.train.lambda_grid.push_back(to_double(key, trim(item)));
    } else {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (c >= 0 || m >= 0 || f >= 0) {
    if (c < 0 || m < 0 || f < 0)
      throw ConfigError(path + ": triple form needs all of c, m and f");
    CodecConfig triple = CodecConfig::from_triple(cfg.codec.n, c, m, f);
    cfg.codec.n1 = triple.n1;
    cfg.codec.n2 = triple.n2;
    cfg.codec.n1_prime = triple.n1_prime;
  }
  cfg.codec.validate();
  cfg.train.validate();
  return cfg;
}

ConfigFile parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

}  // namespace pivotc

// Copyright (c) the ARIW Project Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ariw/config.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "ariw/encoder.hpp"

namespace ariw {
namespace {

std::string trim(std::string_view s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string_view::npos) return {};
  size_t b = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(a, b - a + 1));
}

double parse_num(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail("config: key '{}' expects a number, got '{}'", key, v);
  }
}

int parse_int(const std::string& key, const std::string& v) {
  double d = parse_num(key, v);
  int i = static_cast<int>(d);
  ARIW_CHECK(static_cast<double>(i) == d, "config: key '{}' expects an integer, got '{}'", key, v);
  return i;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail("config: key '{}' expects true/false, got '{}'", key, v);
}

std::array<double, 4> parse_weights(const std::string& key, const std::string& v) {
  std::array<double, 4> out{};
  std::stringstream ss(v);
  std::string item;
  int n = 0;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    ARIW_CHECK(n < 4 && !item.empty(), "config: key '{}' expects 4 comma-separated numbers", key);
    out[n++] = parse_num(key, item);
  }
  ARIW_CHECK(n == 4, "config: key '{}' expects 4 comma-separated numbers", key);
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  ARIW_CHECK(lr > 0.0, "config: lr must be positive");
  ARIW_CHECK(batch == 1, "config: only batch = 1 is supported");
  ARIW_CHECK(steps >= 1, "config: steps must be >= 1");
  ARIW_CHECK(alpha_train >= 0.0, "config: alpha_train must be >= 0");
  check_init_kind(init_kind);
  attack_suite.validate();
  model_config().validate();
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig mc;
  mc.image_size = image_size;
  mc.channels = 3;
  mc.L = L;
  mc.kernel_size = kernel_size;
  mc.n_branches = static_cast<int>(attack_suite.specs.size());
  mc.grad = grad;
  return mc;
}

TrainConfig TrainConfig::parse(const std::string& text) {
  TrainConfig c;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (size_t h = line.find('#'); h != std::string::npos) line.resize(h);
    std::string t = trim(line);
    if (t.empty()) continue;
    size_t eq = t.find('=');
    ARIW_CHECK(eq != std::string::npos, "config line {}: expected 'key = value'", lineno);
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    ARIW_CHECK(!key.empty() && !val.empty(), "config line {}: empty key or value", lineno);

    if (key == "lr") {
      c.lr = parse_num(key, val);
    } else if (key == "batch") {
      c.batch = parse_int(key, val);
    } else if (key == "steps") {
      c.steps = parse_int(key, val);
    } else if (key == "image_size") {
      c.image_size = parse_int(key, val);
    } else if (key == "L") {
      c.L = parse_int(key, val);
    } else if (key == "alpha_train") {
      c.alpha_train = parse_num(key, val);
    } else if (key == "init_kind") {
      c.init_kind = val;
    } else if (key == "grad_mode") {
      c.grad.mode = grad_mode_from_name(val);
    } else if (key == "grad_enabled") {
      c.grad.enabled = parse_bool(key, val);
    } else if (key == "attack_suite") {
      c.attack_suite = AttackSuite::parse(val);
    } else if (key == "loss_weights") {
      auto w = parse_weights(key, val);
      c.loss_weights = LossWeights{w[0], w[1], w[2], w[3]};
    } else if (key == "seed") {
      double d = parse_num(key, val);
      ARIW_CHECK(d >= 0 && d == std::floor(d), "config: seed must be a non-negative integer");
      c.seed = static_cast<uint64_t>(d);
    } else if (key == "kernel_size") {
      c.kernel_size = parse_int(key, val);
    } else {
      fail("config line {}: unknown key '{}'", lineno, key);
    }
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  ARIW_CHECK(in.good(), "config: cannot open '{}'", path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string TrainConfig::serialize() const {
  return fmt::format(
      "lr = {}\n"
      "batch = {}\n"
      "steps = {}\n"
      "image_size = {}\n"
      "L = {}\n"
      "alpha_train = {}\n"
      "init_kind = {}\n"
      "grad_mode = {}\n"
      "grad_enabled = {}\n"
      "attack_suite = {}\n"
      "loss_weights = {}, {}, {}, {}\n"
      "seed = {}\n"
      "kernel_size = {}\n",
      lr, batch, steps, image_size, L, alpha_train, init_kind, grad_mode_name(grad.mode),
      grad.enabled ? "true" : "false", attack_suite.serialize(), loss_weights.l1, loss_weights.l2,
      loss_weights.l3, loss_weights.l4, seed, kernel_size);
}

}  // namespace ariw

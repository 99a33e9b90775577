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

#ifndef ARIW_CONFIG_HPP_
#define ARIW_CONFIG_HPP_

#include <cstdint>
#include <string>

#include "ariw/attacks.hpp"
#include "ariw/losses.hpp"
#include "ariw/model.hpp"

namespace ariw {

struct TrainConfig {
  double lr = 1e-4;
  int batch = 1;
  int steps = 3000;
  int image_size = 64;
  int L = 16;
  double alpha_train = 1.0;
  std::string init_kind = "ones";
  GradMode grad;
  AttackSuite attack_suite = AttackSuite::defaults();
  LossWeights loss_weights;
  uint64_t seed = 42;
  int kernel_size = 3;

  void validate() const;
  ModelConfig model_config() const;

  // Flat "key = value" text, one pair per line; '#' starts a comment.
  static TrainConfig parse(const std::string& text);
  static TrainConfig parse_file(const std::string& path);
  std::string serialize() const;
};

}  // namespace ariw

#endif  // ARIW_CONFIG_HPP_

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

#ifndef ARIW_TRAINER_HPP_
#define ARIW_TRAINER_HPP_

#include <functional>
#include <string>
#include <vector>

#include "ariw/checkpoint.hpp"
#include "ariw/config.hpp"
#include "ariw/dataset.hpp"
#include "ariw/losses.hpp"
#include "ariw/rng.hpp"

namespace ariw {

inline constexpr double kEmaDecay = 0.99;

struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t t = 0;
  std::vector<std::vector<double>> m, v;  // one slot per parameter tensor
};

// One optimization stream: model, optimizer moments, per-image cached
// iteration states, and the RNG streams that make a run reproducible.
struct TrainSession {
  TrainConfig cfg;
  ModelParams<real> model;
  AdamState opt;
  std::vector<Tensor<real>> state_cache;
  std::vector<uint8_t> cache_valid;
  RngStream bits_rng, init_rng;
  std::vector<RngStream> attack_rngs;
  int64_t step = 0;

  TrainSession(const TrainConfig& cfg, size_t n_images);

  // One step on one image: fresh payload, encode from the cached state,
  // decode under every attack, backprop, Adam update, then refresh the
  // cache and the robustness EMA. Aborts on any non-finite loss term.
  LossBreakdown train_step(const Tensor<real>& image, size_t image_idx);
};

std::string loss_log_header(int n_branches);
std::string loss_log_row(int64_t step, const LossBreakdown& b,
                         const std::vector<double>& ema);

using ProgressFn =
    std::function<void(int64_t step, const LossBreakdown& b)>;

// Round-robin over the folder for cfg.steps steps. Writes one CSV row per
// step to loss_log_path when non-empty.
Checkpoint train(const TrainConfig& cfg, const ImageFolder& data,
                 const std::string& loss_log_path,
                 const ProgressFn& progress = {});

}  // namespace ariw

#endif  // ARIW_TRAINER_HPP_

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

#ifndef ARIW_CHECKPOINT_HPP_
#define ARIW_CHECKPOINT_HPP_

#include <cstdint>
#include <string>

#include "ariw/config.hpp"
#include "ariw/model.hpp"

namespace ariw {

struct Checkpoint {
  TrainConfig train_config;
  ModelParams<real> model;
  int64_t step = 0;
  // Counters of the training RNG streams, keyed by stream id.
  std::vector<std::pair<std::string, uint64_t>> rng_state;
};

// Versioned container: magic, little-endian u64 header length, JSON header
// (config text, step, robust weights, tensor directory), then raw float32
// little-endian tensor payloads in directory order. Saving the result of a
// load reproduces the file byte for byte.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ariw

#endif  // ARIW_CHECKPOINT_HPP_

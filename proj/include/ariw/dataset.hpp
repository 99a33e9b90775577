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

#ifndef ARIW_DATASET_HPP_
#define ARIW_DATASET_HPP_

#include <string>
#include <vector>

#include "ariw/common.hpp"
#include "ariw/tensor.hpp"

namespace ariw {

struct ImageFolder {
  std::string dir;
  std::vector<std::string> files;       // sorted basenames
  std::vector<Tensor<real>> images;     // target x target x 3, [0,1]
  int target = 0;
  std::string name() const;             // basename of dir
};

// Loads every .png/.jpg/.jpeg under `dir` (non-recursive), sorted by
// filename, bilinearly resized to target x target. A file with an image
// extension that fails to decode is an error naming the file; a folder with
// no image files is an error.
ImageFolder ingest(const std::string& dir, int target);

}  // namespace ariw

#endif  // ARIW_DATASET_HPP_

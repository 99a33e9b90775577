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

#ifndef ARIW_IO_HPP_
#define ARIW_IO_HPP_

#include <string>

#include "ariw/common.hpp"
#include "ariw/tensor.hpp"

namespace ariw {

// Decodes a PNG/JPEG file into HxWx3 RGB in [0,1]. Grayscale inputs get the
// gray value replicated across channels. Throws on unreadable files.
Tensor<real> read_image(const std::string& path);

// Writes HxWx3 [0,1] as 8-bit PNG (round-to-nearest quantization).
void write_png(const std::string& path, const Tensor<real>& img);

}  // namespace ariw

#endif  // ARIW_IO_HPP_

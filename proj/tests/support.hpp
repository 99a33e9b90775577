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

#ifndef ARIW_TESTS_SUPPORT_HPP_
#define ARIW_TESTS_SUPPORT_HPP_

#include <filesystem>
#include <string>

#include "ariw/common.hpp"
#include "ariw/rng.hpp"
#include "ariw/tensor.hpp"

namespace ariw::testsup {

// Layered value noise plus a ramp and a disc: enough texture to behave like
// a photo for gradient maps, JPEG and SSIM, yet fully deterministic.
template <typename T = real>
Tensor<T> synth_image(int h, int w, uint64_t seed) {
  RngStream rng(seed, "synth");
  Tensor<T> acc = Tensor<T>::zeros({h, w, 3});
  for (int oct = 0; oct < 3; ++oct) {
    int g = 4 << oct;
    Tensor<T> grid({g, g, 3});
    for (T& v : grid.data) v = static_cast<T>(rng.normal());
    Tensor<T> up = resize_image(grid, h, w, Resize::kBilinear);
    double amp = 1.0 / (1 << oct);
    for (int64_t i = 0; i < acc.numel(); ++i)
      acc[i] += static_cast<T>(amp * up[i]);
  }
  double lo = 1e300, hi = -1e300;
  for (T v : acc.data) {
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  double span = std::max(hi - lo, 1e-12);
  const double cy = 0.5 * h, cx = w / 3.0, r2 = 0.08 * h * w;
  Tensor<T> img({h, w, 3});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < 3; ++c) {
        double v = 0.2 + 0.55 * ((acc.at(i, j, c) - lo) / span);
        v += 0.12 * (static_cast<double>(i) + j) / (h + w);
        double dy = i - cy, dx = j - cx;
        if (dy * dy + dx * dx < r2 && c == 0) v += 0.12;
        img.at(i, j, c) = static_cast<T>(std::clamp(v, 0.0, 1.0));
      }
  return img;
}

// Fresh empty directory under the working directory; wiped if it exists.
inline std::string fresh_dir(const std::string& name) {
  std::filesystem::path p = std::filesystem::path("ariw_test_tmp") / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace ariw::testsup

#endif  // ARIW_TESTS_SUPPORT_HPP_

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

#ifndef ARIW_GRADMAP_HPP_
#define ARIW_GRADMAP_HPP_

#include <functional>
#include <string>

#include "ariw/autodiff.hpp"
#include "ariw/tensor.hpp"

namespace ariw {

inline constexpr double kGradFloor = 0.1;

struct GradMode {
  enum class Kind { kAutodiff, kSobel };
  Kind mode = Kind::kAutodiff;
  bool enabled = true;
};

inline std::string grad_mode_name(GradMode::Kind k) {
  return k == GradMode::Kind::kAutodiff ? "autodiff" : "sobel";
}

inline GradMode::Kind grad_mode_from_name(const std::string& s) {
  if (s == "autodiff") return GradMode::Kind::kAutodiff;
  if (s == "sobel") return GradMode::Kind::kSobel;
  fail("grad_mode: unknown mode '{}' (autodiff|sobel)", s);
}

// Per-channel Sobel magnitude with replicate borders.
template <typename T>
Tensor<T> sobel_magnitude(const Tensor<T>& img) {
  ARIW_CHECK(img.rank() == 3, "sobel: input must be HxWxC");
  const int h = img.shape[0], w = img.shape[1], c = img.shape[2];
  static const int gx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static const int gy[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  Tensor<T> out({h, w, c});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int ch = 0; ch < c; ++ch) {
        double sx = 0, sy = 0;
        for (int di = -1; di <= 1; ++di)
          for (int dj = -1; dj <= 1; ++dj) {
            int si = std::min(std::max(i + di, 0), h - 1);
            int sj = std::min(std::max(j + dj, 0), w - 1);
            double v = img.at(si, sj, ch);
            sx += gx[di + 1][dj + 1] * v;
            sy += gy[di + 1][dj + 1] * v;
          }
        out.at(i, j, ch) = static_cast<T>(std::sqrt(sx * sx + sy * sy));
      }
  return out;
}

// |d s / d X| where s is the scalar produced by `scalar_fn` from the image
// leaf. The callable builds the differentiable trace on the given graph.
template <typename T>
Tensor<T> raw_gradient_autodiff(
    const Tensor<T>& img,
    const std::function<ad::Var<T>(ad::Graph<T>&, ad::Var<T>)>& scalar_fn) {
  ad::Graph<T> g;
  ad::Var<T> x = g.leaf(img, true);
  ad::Var<T> s = scalar_fn(g, x);
  ARIW_CHECK(g.val(s).numel() == 1,
             "raw_gradient: scalar_fn must produce a scalar");
  g.backward(s);
  Tensor<T> raw = g.grad_or_zeros(x);
  for (T& v : raw.data) v = std::abs(v);
  return raw;
}

// Min-max rescale onto [kGradFloor, 1]; degenerate inputs become all-ones.
template <typename T>
Tensor<T> normalize_gradient(const Tensor<T>& raw) {
  check_finite(raw, "normalize_gradient");
  double lo = 1e300, hi = -1e300;
  for (T v : raw.data) {
    ARIW_CHECK(v >= T(0), "normalize_gradient: negative raw value");
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  if (hi - lo < 1e-8) return Tensor<T>::ones(raw.shape);
  Tensor<T> out = raw;
  const double span = hi - lo;
  for (T& v : out.data)
    v = static_cast<T>(kGradFloor +
                       (1.0 - kGradFloor) * ((static_cast<double>(v) - lo) / span));
  return out;
}

template <typename T>
Tensor<T> modulate(const Tensor<T>& residual, const Tensor<T>& g) {
  ARIW_CHECK(residual.same_shape(g), "modulate: shape {} vs {}",
             shape_str(residual.shape), shape_str(g.shape));
  Tensor<T> out = residual;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= g[i];
  return out;
}

}  // namespace ariw

#endif  // ARIW_GRADMAP_HPP_

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

#ifndef ARIW_WM_CODEC_HPP_
#define ARIW_WM_CODEC_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ariw/autodiff.hpp"
#include "ariw/rng.hpp"
#include "ariw/tensor.hpp"

namespace ariw {

using WatermarkBits = std::vector<uint8_t>;

inline void check_bits(const WatermarkBits& bits) {
  ARIW_CHECK(!bits.empty(), "watermark: empty bit vector");
  for (uint8_t b : bits)
    ARIW_CHECK(b == 0 || b == 1, "watermark: bit value {} is not 0/1", b);
}

inline WatermarkBits random_bits(int l, RngStream& rng) {
  WatermarkBits bits(static_cast<size_t>(l));
  for (auto& b : bits) b = static_cast<uint8_t>(rng.uniform_int(2));
  return bits;
}

// Lowercase hex, most-significant-bit first, zero-padded to a whole number
// of digits at the tail.
inline std::string bits_to_hex(const WatermarkBits& bits) {
  check_bits(bits);
  std::string out;
  const size_t n = bits.size();
  for (size_t i = 0; i < n; i += 4) {
    int v = 0;
    for (size_t j = 0; j < 4; ++j) {
      v <<= 1;
      if (i + j < n) v |= bits[i + j];
    }
    out += "0123456789abcdef"[v];
  }
  return out;
}

inline WatermarkBits hex_to_bits(const std::string& hex, int l) {
  ARIW_CHECK(l >= 1, "hex_to_bits: payload length must be >= 1");
  const size_t want = (static_cast<size_t>(l) + 3) / 4;
  ARIW_CHECK(hex.size() == want,
             "hex_to_bits: expected {} hex digits for {} bits, got {}", want, l,
             hex.size());
  WatermarkBits bits;
  bits.reserve(want * 4);
  for (char c : hex) {
    int v;
    if (c >= '0' && c <= '9')
      v = c - '0';
    else if (c >= 'a' && c <= 'f')
      v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F')
      v = c - 'A' + 10;
    else {
      fail("hex_to_bits: invalid hex digit '{}'", c);
    }
    for (int j = 3; j >= 0; --j)
      bits.push_back(static_cast<uint8_t>((v >> j) & 1));
  }
  for (size_t i = static_cast<size_t>(l); i < bits.size(); ++i)
    ARIW_CHECK(bits[i] == 0, "hex_to_bits: nonzero padding past bit {}", l);
  bits.resize(static_cast<size_t>(l));
  return bits;
}

// Shape plan for the payload expansion: L bits -> L1 vector -> grid -> HxWxC.
struct ExpandConfig {
  int L = 0;
  int L1 = 0;
  int grid_h = 0, grid_w = 0, grid_c = 0;
  int up_factor = 0;

  void validate(int h, int w, int c) const {
    ARIW_CHECK(L >= 1 && L1 >= 1 && up_factor >= 1,
               "expand config: nonpositive field");
    ARIW_CHECK(grid_h * grid_w * grid_c == L1,
               "expand config: grid {}x{}x{} != L1={}", grid_h, grid_w, grid_c,
               L1);
    ARIW_CHECK(grid_h * up_factor == h && grid_w * up_factor == w &&
                   grid_c == c,
               "expand config: grid {}x{}x{} with d={} does not tile {}x{}x{}",
               grid_h, grid_w, grid_c, up_factor, h, w, c);
  }

  // Default policy: d = 8, grid (H/8)x(W/8)xC, L1 = grid volume.
  static ExpandConfig defaults(int image_size, int channels, int l) {
    ARIW_CHECK(image_size % 8 == 0,
               "expand config: image size {} not divisible by the upsampling "
               "factor 8",
               image_size);
    ExpandConfig cfg;
    cfg.L = l;
    cfg.up_factor = 8;
    cfg.grid_h = image_size / 8;
    cfg.grid_w = image_size / 8;
    cfg.grid_c = channels;
    cfg.L1 = cfg.grid_h * cfg.grid_w * cfg.grid_c;
    ARIW_CHECK(l <= cfg.L1, "expand config: L={} exceeds L1={} at size {}", l,
               cfg.L1, image_size);
    return cfg;
  }
};

template <typename T>
Tensor<T> bits_tensor(const WatermarkBits& bits) {
  check_bits(bits);
  Tensor<T> t({static_cast<int>(bits.size())});
  for (size_t i = 0; i < bits.size(); ++i) t[static_cast<int64_t>(i)] = T(bits[i]);
  return t;
}

template <typename T>
Tensor<T> project(const WatermarkBits& bits, const Tensor<T>& weights,
                  const Tensor<T>& bias) {
  check_bits(bits);
  ARIW_CHECK(weights.rank() == 2 &&
                 weights.shape[0] == static_cast<int>(bits.size()) &&
                 weights.shape[1] == bias.numel(),
             "project: weights {} incompatible with {} bits / bias {}",
             shape_str(weights.shape), bits.size(), bias.numel());
  Tensor<T> x = bits_tensor<T>(bits);
  Tensor<T> y = bias;
  gemm(x.ptr(), weights.ptr(), y.ptr(), 1, weights.shape[0], weights.shape[1],
       false, false, true);
  return y;
}

template <typename T>
Tensor<T> expand(const WatermarkBits& bits, const ExpandConfig& cfg,
                 const Tensor<T>& weights, const Tensor<T>& bias) {
  ARIW_CHECK(static_cast<int>(bits.size()) == cfg.L,
             "expand: {} bits but config L={}", bits.size(), cfg.L);
  Tensor<T> v = project(bits, weights, bias);
  return upsample_nearest(v.reshaped({cfg.grid_h, cfg.grid_w, cfg.grid_c}),
                          cfg.up_factor);
}

// Graph flavor used in training, differentiable in the projection params.
template <typename T>
ad::Var<T> expand_g(ad::Graph<T>& g, const WatermarkBits& bits,
                    const ExpandConfig& cfg, ad::Var<T> weights,
                    ad::Var<T> bias) {
  ARIW_CHECK(static_cast<int>(bits.size()) == cfg.L,
             "expand: {} bits but config L={}", bits.size(), cfg.L);
  ad::Var<T> x = g.constant(bits_tensor<T>(bits));
  ad::Var<T> v = g.matvec(x, weights, bias);
  return g.upsample(g.reshape(v, {cfg.grid_h, cfg.grid_w, cfg.grid_c}),
                    cfg.up_factor);
}

}  // namespace ariw

#endif  // ARIW_WM_CODEC_HPP_

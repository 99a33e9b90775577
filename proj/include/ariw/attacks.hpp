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

#ifndef ARIW_ATTACKS_HPP_
#define ARIW_ATTACKS_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ariw/autodiff.hpp"
#include "ariw/rng.hpp"
#include "ariw/tensor.hpp"

namespace ariw {

struct AttackSpec {
  enum class Kind {
    kIdentity,
    kJpeg,
    kGaussNoise,
    kGaussBlur,
    kCrop,
    kCropout,
    kDropout,
    kScale
  };
  Kind kind = Kind::kIdentity;
  double param = 0.0;
  bool differentiable = true;

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::kIdentity: return "identity";
      case Kind::kJpeg: return "jpeg";
      case Kind::kGaussNoise: return "gauss_noise";
      case Kind::kGaussBlur: return "gauss_blur";
      case Kind::kCrop: return "crop";
      case Kind::kCropout: return "cropout";
      case Kind::kDropout: return "dropout";
      case Kind::kScale: return "scale";
    }
    return "?";
  }
  static Kind kind_from_name(const std::string& s) {
    for (int k = 0; k <= static_cast<int>(Kind::kScale); ++k)
      if (s == kind_name(static_cast<Kind>(k))) return static_cast<Kind>(k);
    fail("attack: unknown kind '{}'", s);
  }
  const char* name() const { return kind_name(kind); }
  bool needs_cover() const {
    return kind == Kind::kCropout || kind == Kind::kDropout;
  }

  void validate() const {
    switch (kind) {
      case Kind::kIdentity:
        break;
      case Kind::kJpeg:
        ARIW_CHECK(param >= 1.0 && param <= 100.0,
                   "attack jpeg: QF {} outside [1,100]", param);
        break;
      case Kind::kGaussNoise:
        ARIW_CHECK(param > 0.0, "attack gauss_noise: variance {} must be > 0",
                   param);
        break;
      case Kind::kGaussBlur: {
        int k = static_cast<int>(param);
        ARIW_CHECK(param == k && k >= 3 && k % 2 == 1,
                   "attack gauss_blur: kernel {} must be an odd integer >= 3",
                   param);
        break;
      }
      case Kind::kCrop:
      case Kind::kCropout:
      case Kind::kDropout:
      case Kind::kScale:
        ARIW_CHECK(param > 0.0 && param <= 1.0,
                   "attack {}: p {} outside (0,1]", name(), param);
        break;
    }
  }
};

struct AttackSuite {
  std::vector<AttackSpec> specs;

  void validate() const {
    ARIW_CHECK(!specs.empty(), "attack suite: empty");
    for (size_t i = 0; i < specs.size(); ++i) {
      specs[i].validate();
      for (size_t j = 0; j < i; ++j)
        ARIW_CHECK(specs[j].kind != specs[i].kind ||
                       specs[j].param != specs[i].param,
                   "attack suite: duplicate entry {}:{}", specs[i].name(),
                   specs[i].param);
    }
  }

  // The eight-distortion default.
  static AttackSuite defaults() {
    using K = AttackSpec::Kind;
    AttackSuite s;
    s.specs = {{K::kIdentity, 0.0},  {K::kJpeg, 50.0},
               {K::kGaussNoise, 0.02}, {K::kGaussBlur, 7.0},
               {K::kCrop, 0.03},     {K::kCropout, 0.9},
               {K::kDropout, 0.9},   {K::kScale, 0.5}};
    return s;
  }

  // "identity, jpeg:50, gauss_noise:0.02, ..." (kind[:param] comma list).
  static AttackSuite parse(const std::string& text) {
    AttackSuite out;
    std::string token;
    auto flush = [&] {
      size_t a = token.find_first_not_of(" \t");
      size_t b = token.find_last_not_of(" \t");
      if (a == std::string::npos) {
        token.clear();
        return;
      }
      std::string item = token.substr(a, b - a + 1);
      token.clear();
      AttackSpec spec;
      size_t colon = item.find(':');
      if (colon == std::string::npos) {
        spec.kind = AttackSpec::kind_from_name(item);
        ARIW_CHECK(spec.kind == AttackSpec::Kind::kIdentity,
                   "attack suite: '{}' requires a parameter", item);
      } else {
        spec.kind = AttackSpec::kind_from_name(item.substr(0, colon));
        try {
          spec.param = std::stod(item.substr(colon + 1));
        } catch (const std::exception&) {
          fail("attack suite: bad parameter in '{}'", item);
        }
      }
      out.specs.push_back(spec);
    };
    for (char c : text) {
      if (c == ',')
        flush();
      else
        token += c;
    }
    flush();
    out.validate();
    return out;
  }

  std::string serialize() const {
    std::string out;
    for (size_t i = 0; i < specs.size(); ++i) {
      if (i) out += ", ";
      out += specs[i].name();
      if (specs[i].kind != AttackSpec::Kind::kIdentity)
        out += fmt::format(":{}", specs[i].param);
    }
    return out;
  }
};

// IJG Annex K base quantization tables.
struct QuantTables {
  int luma[64];
  int chroma[64];
};

inline QuantTables jpeg_quant_tables(int qf) {
  ARIW_CHECK(qf >= 1 && qf <= 100, "jpeg tables: QF {} outside [1,100]", qf);
  static const int kLuma[64] = {
      16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
      14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
      18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
      49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  static const int kChroma[64] = {
      17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
      24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
      99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
      99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};
  const int scale = qf < 50 ? 5000 / qf : 200 - 2 * qf;
  QuantTables t;
  for (int i = 0; i < 64; ++i) {
    t.luma[i] = std::clamp((kLuma[i] * scale + 50) / 100, 1, 255);
    t.chroma[i] = std::clamp((kChroma[i] * scale + 50) / 100, 1, 255);
  }
  return t;
}

namespace detail {

// Per-element quantizer steps over a padded HxWx3 YCbCr image: channel 0
// uses the luma table, channels 1-2 the chroma table.
template <typename T>
Tensor<T> quant_map(int h, int w, const QuantTables& t) {
  Tensor<T> q({h, w, 3});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      int e = (i % 8) * 8 + (j % 8);
      q.at(i, j, 0) = static_cast<T>(t.luma[e]);
      q.at(i, j, 1) = static_cast<T>(t.chroma[e]);
      q.at(i, j, 2) = static_cast<T>(t.chroma[e]);
    }
  return q;
}

template <typename T>
ad::Var<T> jpeg_g(ad::Graph<T>& g, ad::Var<T> x, int qf) {
  const Tensor<T>& vx = g.val(x);
  ARIW_CHECK(vx.shape[2] == 3, "attack jpeg: input must be HxWx3");
  const int h = vx.shape[0], w = vx.shape[1];
  const int ph = (8 - h % 8) % 8, pw = (8 - w % 8) % 8;
  QuantTables qt = jpeg_quant_tables(qf);
  Tensor<T> q = quant_map<T>(h + ph, w + pw, qt);
  Tensor<T> iq = q;
  for (T& v : iq.data) v = T(1) / v;

  ad::Var<T> y = g.rgb_to_ycbcr(x);
  y = g.add_scalar(g.scale(y, T(255)), T(-128));
  if (ph || pw) y = g.pad_br(y, ph, pw);
  y = g.dct8(y, false);
  y = g.round_ste(g.mul_const(y, std::move(iq)));
  y = g.mul_const(y, std::move(q));
  y = g.dct8(y, true);
  y = g.scale(g.add_scalar(y, T(128)), T(1) / T(255));
  if (ph || pw) y = g.crop_tl(y, h, w);
  return g.ycbcr_to_rgb(y);
}

template <typename T>
Tensor<T> gauss_kernel(int k) {
  const double sigma = 0.3 * ((k - 1) / 2 - 1) + 0.8;
  Tensor<double> kd({k, k});
  double sum = 0;
  const int r = k / 2;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      double d2 = static_cast<double>((i - r) * (i - r) + (j - r) * (j - r));
      double v = std::exp(-d2 / (2.0 * sigma * sigma));
      kd.at(i, j) = v;
      sum += v;
    }
  for (double& v : kd.data) v /= sum;
  return kd.cast<T>();
}

// Mask helpers. Draw order is fixed: geometry draws first, then any
// per-pixel draws in row-major order.
template <typename T>
Tensor<T> crop_mask(int h, int w, int c, double p, RngStream& rng) {
  const double area = p * h * w;
  const int side = static_cast<int>(std::floor(std::sqrt(area)));
  ARIW_CHECK(side >= 1, "attack crop: p*H*W = {} keeps no pixel", area);
  const int top = static_cast<int>(rng.uniform_int(h - side + 1));
  const int left = static_cast<int>(rng.uniform_int(w - side + 1));
  Tensor<T> mask({h, w, c});
  for (int i = top; i < top + side; ++i)
    for (int j = left; j < left + side; ++j)
      for (int ch = 0; ch < c; ++ch) mask.at(i, j, ch) = T(1);
  return mask;
}

template <typename T>
Tensor<T> cropout_mask(int h, int w, int c, double p, RngStream& rng) {
  // Rectangle of area ~= p*H*W: height uniform over the feasible range,
  // width derived from the area.
  const int hmin = std::max(1, static_cast<int>(std::ceil(p * h)));
  const int hk = hmin + static_cast<int>(rng.uniform_int(h - hmin + 1));
  const int wk = std::clamp(
      static_cast<int>(std::lround(p * h * w / hk)), 1, w);
  const int top = static_cast<int>(rng.uniform_int(h - hk + 1));
  const int left = static_cast<int>(rng.uniform_int(w - wk + 1));
  Tensor<T> mask({h, w, c});
  for (int i = top; i < top + hk; ++i)
    for (int j = left; j < left + wk; ++j)
      for (int ch = 0; ch < c; ++ch) mask.at(i, j, ch) = T(1);
  return mask;
}

template <typename T>
Tensor<T> dropout_mask(int h, int w, int c, double p, RngStream& rng) {
  Tensor<T> mask({h, w, c});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      T keep = rng.uniform() < p ? T(1) : T(0);
      for (int ch = 0; ch < c; ++ch) mask.at(i, j, ch) = keep;
    }
  return mask;
}

}  // namespace detail

// Differentiable trace of one attack. `cover` is consulted only by
// cropout/dropout. Identity returns `wm` itself (bitwise no-op); every other
// kind ends in a straight-through clamp to [0,1].
template <typename T>
ad::Var<T> apply_attack_g(ad::Graph<T>& g, ad::Var<T> wm, ad::Var<T> cover,
                          const AttackSpec& spec, RngStream& rng) {
  spec.validate();
  const Tensor<T>& vw = g.val(wm);
  ARIW_CHECK(vw.rank() == 3, "attack: input must be HxWxC");
  const int h = vw.shape[0], w = vw.shape[1], c = vw.shape[2];
  using K = AttackSpec::Kind;
  if (spec.needs_cover())
    ARIW_CHECK(g.val(cover).same_shape(vw),
               "attack {}: cover image missing or mismatched", spec.name());
  switch (spec.kind) {
    case K::kIdentity:
      return wm;
    case K::kJpeg:
      return g.clamp01_ste(
          detail::jpeg_g(g, wm, static_cast<int>(std::lround(spec.param))));
    case K::kGaussNoise: {
      const double sigma = std::sqrt(spec.param);
      Tensor<T> noise({h, w, c});
      for (T& v : noise.data) v = static_cast<T>(sigma * rng.normal());
      return g.clamp01_ste(g.add_const(wm, std::move(noise)));
    }
    case K::kGaussBlur:
      return g.clamp01_ste(g.blur_depthwise(
          wm, detail::gauss_kernel<T>(static_cast<int>(spec.param))));
    case K::kCrop:
      return g.clamp01_ste(
          g.mul_const(wm, detail::crop_mask<T>(h, w, c, spec.param, rng)));
    case K::kCropout:
      return g.clamp01_ste(g.mix(
          wm, cover, detail::cropout_mask<T>(h, w, c, spec.param, rng)));
    case K::kDropout:
      return g.clamp01_ste(g.mix(
          wm, cover, detail::dropout_mask<T>(h, w, c, spec.param, rng)));
    case K::kScale: {
      const int sh = std::max(1, static_cast<int>(std::floor(spec.param * h)));
      const int sw = std::max(1, static_cast<int>(std::floor(spec.param * w)));
      return g.clamp01_ste(g.resize_bl(g.resize_bl(wm, sh, sw), h, w));
    }
  }
  fail("attack: unreachable kind");
}

// Quantize onto the 8-bit pixel grid (what a real save/load does).
template <typename T>
Tensor<T> quantize_u8(Tensor<T> img) {
  for (T& v : img.data) {
    double q = std::round(std::min(1.0, std::max(0.0, static_cast<double>(v))) *
                          255.0) /
               255.0;
    v = static_cast<T>(q);
  }
  return img;
}

// Evaluation flavor. Identical forward math to the differentiable trace;
// for JPEG the faithful path additionally snaps input and output onto the
// 8-bit grid, as an actual codec round-trip does.
template <typename T>
Tensor<T> apply_attack(const Tensor<T>& wm, const Tensor<T>& cover,
                       const AttackSpec& spec, RngStream& rng) {
  const bool faithful_jpeg =
      spec.kind == AttackSpec::Kind::kJpeg && !spec.differentiable;
  ad::Graph<T> g;
  ad::Var<T> x = g.constant(faithful_jpeg ? quantize_u8(wm) : wm);
  ad::Var<T> cv = g.constant(spec.needs_cover() ? cover : wm);
  Tensor<T> out = g.val(apply_attack_g(g, x, cv, spec, rng));
  if (faithful_jpeg) out = quantize_u8(std::move(out));
  check_finite(out, "attack");
  return out;
}

}  // namespace ariw

#endif  // ARIW_ATTACKS_HPP_

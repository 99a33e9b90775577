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

#ifndef ARIW_TENSOR_HPP_
#define ARIW_TENSOR_HPP_

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "ariw/common.hpp"

namespace ariw {

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Dense row-major tensor. Images are HxWxC, convolution kernels KxKxCinxCout.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), T(0));
  }
  Tensor(std::vector<int> s, T fill) : shape(std::move(s)) {
    data.assign(numel_of(shape), fill);
  }
  Tensor(std::vector<int> s, std::vector<T> d)
      : shape(std::move(s)), data(std::move(d)) {
    ARIW_CHECK(data.size() == static_cast<size_t>(numel_of(shape)),
               "tensor: {} values for shape {}", data.size(), shape_str(shape));
  }

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      ARIW_CHECK(d > 0, "tensor: nonpositive dim in {}", shape_str(s));
      n *= d;
    }
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  bool empty() const { return data.empty(); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  T& at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
  const T& at(int i, int j) const {
    return data[static_cast<size_t>(i) * shape[1] + j];
  }
  T& at(int i, int j, int c) {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + c];
  }
  const T& at(int i, int j, int c) const {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + c];
  }
  T& at(int a, int b, int c, int d) {
    return data[((static_cast<size_t>(a) * shape[1] + b) * shape[2] + c) *
                    shape[3] +
                d];
  }
  const T& at(int a, int b, int c, int d) const {
    return data[((static_cast<size_t>(a) * shape[1] + b) * shape[2] + c) *
                    shape[3] +
                d];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  Tensor reshaped(std::vector<int> s) const {
    ARIW_CHECK(numel_of(s) == numel(), "reshape: {} -> {} changes element count",
               shape_str(shape), shape_str(s));
    Tensor out;
    out.shape = std::move(s);
    out.data = data;
    return out;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, T v) { return Tensor(std::move(s), v); }
  static Tensor ones(std::vector<int> s) { return full(std::move(s), T(1)); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.data)
    if (!std::isfinite(v)) return false;
  return true;
}

template <typename T>
void check_finite(const Tensor<T>& t, const std::string& what) {
  ARIW_CHECK(all_finite(t), "{}: non-finite value in result", what);
}

template <typename T>
Tensor<T> clamp01(Tensor<T> t) {
  for (T& v : t.data) v = std::min(T(1), std::max(T(0), v));
  return t;
}

// ---------------------------------------------------------------------------
// GEMM (Eigen). C[MxN] = op(A) * op(B), row-major buffers.

template <typename T>
using RowMat =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using CMatMap = Eigen::Map<const RowMat<T>>;

// A is MxK (or KxM when trans_a), B is KxN (or NxK when trans_b).
template <typename T>
void gemm(const T* a, const T* b, T* c, int m, int k, int n, bool trans_a,
          bool trans_b, bool accumulate) {
  MatMap<T> cm(c, m, n);
  auto run = [&](const auto& lhs, const auto& rhs) {
    if (accumulate)
      cm.noalias() += lhs * rhs;
    else
      cm.noalias() = lhs * rhs;
  };
  if (!trans_a && !trans_b)
    run(CMatMap<T>(a, m, k), CMatMap<T>(b, k, n));
  else if (trans_a && !trans_b)
    run(CMatMap<T>(a, k, m).transpose(), CMatMap<T>(b, k, n));
  else if (!trans_a && trans_b)
    run(CMatMap<T>(a, m, k), CMatMap<T>(b, n, k).transpose());
  else
    run(CMatMap<T>(a, k, m).transpose(), CMatMap<T>(b, n, k).transpose());
}

// ---------------------------------------------------------------------------
// Convolution. Kernels are [k,k,cin,cout]; flattened they are already the
// [k*k*cin, cout] matrix the im2col product needs.

enum class Pad { kSame, kValid };

struct ConvGeom {
  int h = 0, w = 0, cin = 0, cout = 0, k = 0, stride = 1;
  int oh = 0, ow = 0, pt = 0, pl = 0;
};

inline ConvGeom conv_geometry(const std::vector<int>& x_shape,
                              const std::vector<int>& k_shape, int stride,
                              Pad pad) {
  ARIW_CHECK(x_shape.size() == 3, "conv2d: input must be HxWxC, got {}",
             shape_str(x_shape));
  ARIW_CHECK(k_shape.size() == 4 && k_shape[0] == k_shape[1],
             "conv2d: kernel must be KxKxCinxCout, got {}", shape_str(k_shape));
  ARIW_CHECK(x_shape[2] == k_shape[2],
             "conv2d: input channels {} do not match kernel channels {}",
             x_shape[2], k_shape[2]);
  ARIW_CHECK(stride >= 1, "conv2d: stride must be positive, got {}", stride);
  ConvGeom g;
  g.h = x_shape[0];
  g.w = x_shape[1];
  g.cin = x_shape[2];
  g.k = k_shape[0];
  g.cout = k_shape[3];
  g.stride = stride;
  if (pad == Pad::kSame) {
    g.oh = (g.h + stride - 1) / stride;
    g.ow = (g.w + stride - 1) / stride;
    int ph = std::max(0, (g.oh - 1) * stride + g.k - g.h);
    int pw = std::max(0, (g.ow - 1) * stride + g.k - g.w);
    g.pt = ph / 2;
    g.pl = pw / 2;
  } else {
    ARIW_CHECK(g.h >= g.k && g.w >= g.k,
               "conv2d: valid padding needs input >= kernel ({}x{} vs k={})",
               g.h, g.w, g.k);
    g.oh = (g.h - g.k) / stride + 1;
    g.ow = (g.w - g.k) / stride + 1;
  }
  return g;
}

// cols is [oh*ow, k*k*cin], zero-filled where the window leaves the image.
template <typename T>
void im2col(const ConvGeom& g, const T* x, T* cols) {
  const int kkc = g.k * g.k * g.cin;
  for (int oy = 0; oy < g.oh; ++oy) {
    for (int ox = 0; ox < g.ow; ++ox) {
      T* row = cols + (static_cast<size_t>(oy) * g.ow + ox) * kkc;
      for (int ky = 0; ky < g.k; ++ky) {
        int iy = oy * g.stride - g.pt + ky;
        for (int kx = 0; kx < g.k; ++kx) {
          int ix = ox * g.stride - g.pl + kx;
          T* dst = row + (ky * g.k + kx) * g.cin;
          if (iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) {
            std::fill(dst, dst + g.cin, T(0));
          } else {
            const T* src = x + (static_cast<size_t>(iy) * g.w + ix) * g.cin;
            std::copy(src, src + g.cin, dst);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add window rows back onto the image grid.
template <typename T>
void col2im(const ConvGeom& g, const T* cols, T* x) {
  const int kkc = g.k * g.k * g.cin;
  for (int oy = 0; oy < g.oh; ++oy) {
    for (int ox = 0; ox < g.ow; ++ox) {
      const T* row = cols + (static_cast<size_t>(oy) * g.ow + ox) * kkc;
      for (int ky = 0; ky < g.k; ++ky) {
        int iy = oy * g.stride - g.pt + ky;
        if (iy < 0 || iy >= g.h) continue;
        for (int kx = 0; kx < g.k; ++kx) {
          int ix = ox * g.stride - g.pl + kx;
          if (ix < 0 || ix >= g.w) continue;
          const T* src = row + (ky * g.k + kx) * g.cin;
          T* dst = x + (static_cast<size_t>(iy) * g.w + ix) * g.cin;
          for (int c = 0; c < g.cin; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel,
                 const Tensor<T>& bias, int stride, Pad pad) {
  ConvGeom g = conv_geometry(x.shape, kernel.shape, stride, pad);
  ARIW_CHECK(bias.numel() == g.cout, "conv2d: bias size {} != cout {}",
             bias.numel(), g.cout);
  Tensor<T> cols({g.oh * g.ow, g.k * g.k * g.cin});
  im2col(g, x.ptr(), cols.ptr());
  Tensor<T> y({g.oh, g.ow, g.cout});
  gemm(cols.ptr(), kernel.ptr(), y.ptr(), g.oh * g.ow, g.k * g.k * g.cin,
       g.cout, false, false, false);
  T* yp = y.ptr();
  for (int64_t i = 0; i < g.oh * g.ow; ++i)
    for (int c = 0; c < g.cout; ++c) yp[i * g.cout + c] += bias[c];
  return y;
}

// Transposed convolution, the exact adjoint of same-padded strided conv2d:
// input is the conv output grid [h,w,cout], result is [h*stride, w*stride, cin].
template <typename T>
Tensor<T> transposed_conv2d(const Tensor<T>& x, const Tensor<T>& kernel,
                            const Tensor<T>& bias, int stride) {
  ARIW_CHECK(x.rank() == 3, "tconv2d: input must be HxWxC, got {}",
             shape_str(x.shape));
  ARIW_CHECK(kernel.rank() == 4 && kernel.shape[0] == kernel.shape[1],
             "tconv2d: kernel must be KxKxCinxCout, got {}",
             shape_str(kernel.shape));
  ARIW_CHECK(x.shape[2] == kernel.shape[3],
             "tconv2d: input channels {} do not match kernel cout {}",
             x.shape[2], kernel.shape[3]);
  const int cin = kernel.shape[2];
  std::vector<int> big{x.shape[0] * stride, x.shape[1] * stride, cin};
  ConvGeom g = conv_geometry(big, kernel.shape, stride, Pad::kSame);
  ARIW_CHECK(g.oh == x.shape[0] && g.ow == x.shape[1],
             "tconv2d: inconsistent geometry");
  ARIW_CHECK(bias.numel() == cin, "tconv2d: bias size {} != cin {}",
             bias.numel(), cin);
  Tensor<T> cols({g.oh * g.ow, g.k * g.k * g.cin});
  gemm(x.ptr(), kernel.ptr(), cols.ptr(), g.oh * g.ow, g.cout,
       g.k * g.k * g.cin, false, true, false);
  Tensor<T> y(big);
  col2im(g, cols.ptr(), y.ptr());
  T* yp = y.ptr();
  for (int64_t i = 0; i < static_cast<int64_t>(big[0]) * big[1]; ++i)
    for (int c = 0; c < cin; ++c) yp[i * cin + c] += bias[c];
  return y;
}

// ---------------------------------------------------------------------------
// Resize. Bilinear uses half-pixel centers with border-clamped taps; nearest
// maps each output center onto the source grid.

enum class Resize { kBilinear, kNearest };

struct ResizeTap {
  int lo = 0, hi = 0;
  double w_hi = 0.0;  // weight of hi; lo gets 1 - w_hi
};

inline ResizeTap resize_tap(int d, int in, int out) {
  ResizeTap t;
  double ratio = static_cast<double>(in) / out;
  double s = (d + 0.5) * ratio - 0.5;
  double f = std::floor(s);
  t.lo = std::min(std::max(static_cast<int>(f), 0), in - 1);
  t.hi = std::min(t.lo + 1, in - 1);
  t.w_hi = s - f;
  if (s < 0.0) t.w_hi = 0.0;
  if (t.hi == t.lo) t.w_hi = 0.0;
  return t;
}

inline int nearest_src(int d, int in, int out) {
  double ratio = static_cast<double>(in) / out;
  int s = static_cast<int>(std::floor((d + 0.5) * ratio));
  return std::min(std::max(s, 0), in - 1);
}

template <typename T>
Tensor<T> resize_image(const Tensor<T>& x, int oh, int ow,
                       Resize mode = Resize::kBilinear) {
  ARIW_CHECK(x.rank() == 3, "resize: input must be HxWxC, got {}",
             shape_str(x.shape));
  ARIW_CHECK(oh >= 1 && ow >= 1, "resize: target {}x{} must be positive", oh,
             ow);
  const int h = x.shape[0], w = x.shape[1], c = x.shape[2];
  if (oh == h && ow == w) return x;
  Tensor<T> y({oh, ow, c});
  if (mode == Resize::kNearest) {
    std::vector<int> sx(static_cast<size_t>(ow));
    for (int j = 0; j < ow; ++j) sx[static_cast<size_t>(j)] = nearest_src(j, w, ow);
    for (int i = 0; i < oh; ++i) {
      int si = nearest_src(i, h, oh);
      for (int j = 0; j < ow; ++j) {
        const T* src = &x.at(si, sx[static_cast<size_t>(j)], 0);
        T* dst = &y.at(i, j, 0);
        std::copy(src, src + c, dst);
      }
    }
    return y;
  }
  std::vector<ResizeTap> tx(static_cast<size_t>(ow));
  for (int j = 0; j < ow; ++j) tx[static_cast<size_t>(j)] = resize_tap(j, w, ow);
  for (int i = 0; i < oh; ++i) {
    ResizeTap ty = resize_tap(i, h, oh);
    for (int j = 0; j < ow; ++j) {
      const ResizeTap& t = tx[static_cast<size_t>(j)];
      for (int ch = 0; ch < c; ++ch) {
        double v00 = x.at(ty.lo, t.lo, ch), v01 = x.at(ty.lo, t.hi, ch);
        double v10 = x.at(ty.hi, t.lo, ch), v11 = x.at(ty.hi, t.hi, ch);
        double top = v00 + (v01 - v00) * t.w_hi;
        double bot = v10 + (v11 - v10) * t.w_hi;
        y.at(i, j, ch) = static_cast<T>(top + (bot - top) * ty.w_hi);
      }
    }
  }
  return y;
}

// Nearest-neighbor integer upsampling by factor d (block replication).
template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int d) {
  ARIW_CHECK(x.rank() == 3, "upsample: input must be HxWxC");
  ARIW_CHECK(d >= 1, "upsample: factor must be >= 1, got {}", d);
  const int h = x.shape[0], w = x.shape[1], c = x.shape[2];
  Tensor<T> y({h * d, w * d, c});
  for (int i = 0; i < h * d; ++i)
    for (int j = 0; j < w * d; ++j) {
      const T* src = &x.at(i / d, j / d, 0);
      std::copy(src, src + c, &y.at(i, j, 0));
    }
  return y;
}

}  // namespace ariw

#endif  // ARIW_TENSOR_HPP_

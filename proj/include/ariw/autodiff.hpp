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

#ifndef ARIW_AUTODIFF_HPP_
#define ARIW_AUTODIFF_HPP_

#include <array>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "ariw/tensor.hpp"

namespace ariw::ad {

template <typename T>
class Graph;

template <typename T>
struct Var {
  Graph<T>* g = nullptr;
  int id = -1;
};

inline const std::array<double, 64>& dct8_matrix() {
  static const std::array<double, 64> m = [] {
    std::array<double, 64> out{};
    const double pi = 3.14159265358979323846264338327950288;
    for (int u = 0; u < 8; ++u) {
      double cu = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n)
        out[static_cast<size_t>(u * 8 + n)] =
            cu * std::cos((2 * n + 1) * u * pi / 16.0);
    }
    return out;
  }();
  return m;
}

// Blockwise orthonormal 8x8 DCT-II per channel; inverse is the transpose.
template <typename T>
Tensor<T> dct8_apply(const Tensor<T>& x, bool inverse) {
  ARIW_CHECK(x.rank() == 3 && x.shape[0] % 8 == 0 && x.shape[1] % 8 == 0,
             "dct8: dimensions must be multiples of 8, got {}",
             shape_str(x.shape));
  const int h = x.shape[0], w = x.shape[1], c = x.shape[2];
  const std::array<double, 64>& m = dct8_matrix();
  Tensor<T> y({h, w, c});
  double in[64], tmp[64];
  for (int by = 0; by < h; by += 8)
    for (int bx = 0; bx < w; bx += 8)
      for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j)
            in[i * 8 + j] = x.at(by + i, bx + j, ch);
        // forward: M * B * M^T ; inverse: M^T * B * M
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            double s = 0;
            for (int k = 0; k < 8; ++k)
              s += (inverse ? m[k * 8 + i] : m[i * 8 + k]) * in[k * 8 + j];
            tmp[i * 8 + j] = s;
          }
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            double s = 0;
            for (int k = 0; k < 8; ++k)
              s += tmp[i * 8 + k] * (inverse ? m[j * 8 + k] : m[k * 8 + j]);
            y.at(by + i, bx + j, ch) = static_cast<T>(s);
          }
      }
  return y;
}

template <typename T>
Tensor<T> depthwise_replicate(const Tensor<T>& x, const Tensor<T>& kernel) {
  const int h = x.shape[0], w = x.shape[1], c = x.shape[2];
  const int k = kernel.shape[0], r = k / 2;
  Tensor<T> y({h, w, c});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int ch = 0; ch < c; ++ch) {
        double s = 0;
        for (int ky = 0; ky < k; ++ky) {
          int si = std::min(std::max(i + ky - r, 0), h - 1);
          for (int kx = 0; kx < k; ++kx) {
            int sj = std::min(std::max(j + kx - r, 0), w - 1);
            s += static_cast<double>(kernel.at(ky, kx)) * x.at(si, sj, ch);
          }
        }
        y.at(i, j, ch) = static_cast<T>(s);
      }
  return y;
}

// JFIF full-range conversion on the [0,1] pixel scale.
inline const double* color_matrix(bool forward) {
  // Chroma rows derived from the luma weights instead of the usual 6-digit
  // roundings so inv is the exact inverse of fwd; 1.402 = 2 - 2*0.299 and
  // 1.772 = 2 - 2*0.114.
  static const double fwd[9] = {0.299,          0.587,          0.114,
                                -0.299 / 1.772, -0.587 / 1.772, 0.5,
                                0.5,            -0.587 / 1.402, -0.114 / 1.402};
  static const double inv[9] = {1.0, 0.0,                    1.402,
                                1.0, -0.114 * 1.772 / 0.587, -0.299 * 1.402 / 0.587,
                                1.0, 1.772,                  0.0};
  return forward ? fwd : inv;
}

template <typename T>
void color_px(bool forward, const T* in, T* out) {
  const double* m = color_matrix(forward);
  double a = in[0], b = in[1], c = in[2];
  if (!forward) {
    b -= 0.5;
    c -= 0.5;
  }
  double o0 = m[0] * a + m[1] * b + m[2] * c;
  double o1 = m[3] * a + m[4] * b + m[5] * c;
  double o2 = m[6] * a + m[7] * b + m[8] * c;
  if (forward) {
    o1 += 0.5;
    o2 += 0.5;
  }
  out[0] = static_cast<T>(o0);
  out[1] = static_cast<T>(o1);
  out[2] = static_cast<T>(o2);
}

template <typename T>
Tensor<T> color_convert(const Tensor<T>& x, bool forward) {
  ARIW_CHECK(x.rank() == 3 && x.shape[2] == 3,
             "color transform: input must be HxWx3");
  Tensor<T> y = x;
  const int64_t px = static_cast<int64_t>(x.shape[0]) * x.shape[1];
  for (int64_t p = 0; p < px; ++p) color_px(forward, &x[p * 3], &y[p * 3]);
  return y;
}

// Tape-based reverse-mode engine over Tensor<T>. Nodes whose inputs carry no
// differentiable leaf get no backward closure, so inference traces cost only
// the forward math. Reductions and transcendental kernels accumulate in
// double regardless of T.
template <typename T>
class Graph {
 public:
  Graph() { nodes_.reserve(256); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> leaf(Tensor<T> v, bool requires_grad) {
    return wrap(push(std::move(v), requires_grad));
  }
  Var<T> constant(Tensor<T> v) { return leaf(std::move(v), false); }

  const Tensor<T>& val(Var<T> x) const {
    check(x);
    return nodes_[static_cast<size_t>(x.id)].val;
  }
  bool needs_grad(Var<T> x) const {
    check(x);
    return nodes_[static_cast<size_t>(x.id)].rg;
  }
  // Gradient accumulated by backward(); zeros if the leaf was never reached.
  Tensor<T> grad_or_zeros(Var<T> x) const {
    check(x);
    const Node& n = nodes_[static_cast<size_t>(x.id)];
    return n.grad.empty() ? Tensor<T>::zeros(n.val.shape) : n.grad;
  }

  void backward(Var<T> loss) {
    check(loss);
    ARIW_CHECK(val(loss).numel() == 1, "backward: loss must be scalar");
    ARIW_CHECK(nodes_[static_cast<size_t>(loss.id)].rg,
               "backward: loss does not depend on any trainable leaf");
    gbuf(loss.id)[0] = T(1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (!n.grad.empty() && n.back) n.back(*this);
    }
  }

  // ------------------------------------------------------------------ basic
  Var<T> add(Var<T> a, Var<T> b) {
    return ewise2(a, b, [](T x, T y) { return x + y; },
                  [](Graph& g, int ai, int bi, const Tensor<T>& gy) {
                    g.axpy(ai, gy, T(1));
                    g.axpy(bi, gy, T(1));
                  });
  }
  Var<T> sub(Var<T> a, Var<T> b) {
    return ewise2(a, b, [](T x, T y) { return x - y; },
                  [](Graph& g, int ai, int bi, const Tensor<T>& gy) {
                    g.axpy(ai, gy, T(1));
                    g.axpy(bi, gy, T(-1));
                  });
  }
  Var<T> mul(Var<T> a, Var<T> b) {
    const Tensor<T>&va = val(a), &vb = val(b);
    ARIW_CHECK(va.same_shape(vb), "mul: shape {} vs {}", shape_str(va.shape),
               shape_str(vb.shape));
    Tensor<T> y = va;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] *= vb[i];
    int id = push(std::move(y), rg2(a, b));
    if (node(id).rg)
      node(id).back = [ai = a.id, bi = b.id, yi = id](Graph& g) {
        const Tensor<T>& gy = g.node(yi).grad;
        if (Tensor<T>* ga = g.gslot(ai)) {
          const Tensor<T>& vb2 = g.node(bi).val;
          for (int64_t i = 0; i < gy.numel(); ++i) (*ga)[i] += gy[i] * vb2[i];
        }
        if (Tensor<T>* gb = g.gslot(bi)) {
          const Tensor<T>& va2 = g.node(ai).val;
          for (int64_t i = 0; i < gy.numel(); ++i) (*gb)[i] += gy[i] * va2[i];
        }
      };
    return wrap(id);
  }
  Var<T> scale(Var<T> a, T s) {
    Tensor<T> y = val(a);
    for (T& v : y.data) v *= s;
    int id = push(std::move(y), needs_grad(a));
    if (node(id).rg)
      node(id).back = [ai = a.id, yi = id, s](Graph& g) {
        g.axpy(ai, g.node(yi).grad, s);
      };
    return wrap(id);
  }
  Var<T> add_scalar(Var<T> a, T s) {
    Tensor<T> y = val(a);
    for (T& v : y.data) v += s;
    int id = push(std::move(y), needs_grad(a));
    if (node(id).rg)
      node(id).back = [ai = a.id, yi = id](Graph& g) {
        g.axpy(ai, g.node(yi).grad, T(1));
      };
    return wrap(id);
  }
  Var<T> mul_const(Var<T> a, Tensor<T> c) {
    const Tensor<T>& va = val(a);
    ARIW_CHECK(va.same_shape(c), "mul_const: shape {} vs {}",
               shape_str(va.shape), shape_str(c.shape));
    Tensor<T> y = va;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] *= c[i];
    int id = push(std::move(y), needs_grad(a));
    if (node(id).rg)
      node(id).back = [ai = a.id, yi = id, c = std::move(c)](Graph& g) {
        if (Tensor<T>* ga = g.gslot(ai)) {
          const Tensor<T>& gy = g.node(yi).grad;
          for (int64_t i = 0; i < gy.numel(); ++i) (*ga)[i] += gy[i] * c[i];
        }
      };
    return wrap(id);
  }
  Var<T> add_const(Var<T> a, Tensor<T> c) {
    const Tensor<T>& va = val(a);
    ARIW_CHECK(va.same_shape(c), "add_const: shape {} vs {}",
               shape_str(va.shape), shape_str(c.shape));
    Tensor<T> y = va;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] += c[i];
    int id = push(std::move(y), needs_grad(a));
    if (node(id).rg)
      node(id).back = [ai = a.id, yi = id](Graph& g) {
        g.axpy(ai, g.node(yi).grad, T(1));
      };
    return wrap(id);
  }
  // mask*a + (1-mask)*b with a binary or soft mask held constant.
  Var<T> mix(Var<T> a, Var<T> b, Tensor<T> mask) {
    const Tensor<T>&va = val(a), &vb = val(b);
    ARIW_CHECK(va.same_shape(vb) && va.same_shape(mask),
               "mix: mismatched shapes");
    Tensor<T> y = va;
    for (int64_t i = 0; i < y.numel(); ++i)
      y[i] = mask[i] * va[i] + (T(1) - mask[i]) * vb[i];
    int id = push(std::move(y), rg2(a, b));
    if (node(id).rg)
      node(id).back = [ai = a.id, bi = b.id, yi = id,
                       mask = std::move(mask)](Graph& g) {
        const Tensor<T>& gy = g.node(yi).grad;
        if (Tensor<T>* ga = g.gslot(ai))
          for (int64_t i = 0; i < gy.numel(); ++i) (*ga)[i] += gy[i] * mask[i];
        if (Tensor<T>* gb = g.gslot(bi))
          for (int64_t i = 0; i < gy.numel(); ++i)
            (*gb)[i] += gy[i] * (T(1) - mask[i]);
      };
    return wrap(id);
  }

  Var<T> concat_ch(const std::vector<Var<T>>& xs) {
    ARIW_CHECK(!xs.empty(), "concat_ch: empty input list");
    int h = val(xs[0]).shape[0], w = val(xs[0]).shape[1], c = 0;
    bool rg = false;
    for (Var<T> x : xs) {
      const Tensor<T>& v = val(x);
      ARIW_CHECK(v.rank() == 3 && v.shape[0] == h && v.shape[1] == w,
                 "concat_ch: spatial mismatch");
      c += v.shape[2];
      rg = rg || needs_grad(x);
    }
    Tensor<T> y({h, w, c});
    int off = 0;
    for (Var<T> x : xs) {
      const Tensor<T>& v = val(x);
      int vc = v.shape[2];
      for (int64_t p = 0; p < static_cast<int64_t>(h) * w; ++p)
        std::copy(v.ptr() + p * vc, v.ptr() + (p + 1) * vc,
                  y.ptr() + p * c + off);
      off += vc;
    }
    int id = push(std::move(y), rg);
    if (rg) {
      std::vector<int> ids;
      std::vector<int> chans;
      for (Var<T> x : xs) {
        ids.push_back(x.id);
        chans.push_back(val(x).shape[2]);
      }
      node(id).back = [ids, chans, yi = id, h, w, c](Graph& g) {
        const Tensor<T>& gy = g.node(yi).grad;
        int off2 = 0;
        for (size_t k = 0; k < ids.size(); ++k) {
          int vc = chans[k];
          if (Tensor<T>* gx = g.gslot(ids[k])) {
            for (int64_t p = 0; p < static_cast<int64_t>(h) * w; ++p)
              for (int q = 0; q < vc; ++q)
                (*gx)[p * vc + q] += gy[p * c + off2 + q];
          }
          off2 += vc;
        }
      };
    }
    return wrap(id);
  }

  // ------------------------------------------------------------ convolution
  Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int stride, Pad pad) {
    Tensor<T> y = ::ariw::conv2d(val(x), val(w), val(b), stride, pad);
    ConvGeom geo = conv_geometry(val(x).shape, val(w).shape, stride, pad);
    bool rg = rg2(x, w) || needs_grad(b);
    int id = push(std::move(y), rg);
    if (rg)
      node(id).back = [xi = x.id, wi = w.id, bi = b.id, yi = id,
                       geo](Graph& g) {
        const Tensor<T>& gy = g.node(yi).grad;
        const int rows = geo.oh * geo.ow, kkc = geo.k * geo.k * geo.cin;
        if (Tensor<T>* gb = g.gslot(bi)) {
          for (int64_t r = 0; r < rows; ++r)
            for (int c = 0; c < geo.cout; ++c)
              (*gb)[c] += gy[r * geo.cout + c];
        }
        const bool need_w = g.gslot(wi) != nullptr;
        const bool need_x = g.gslot(xi) != nullptr;
        if (!need_w && !need_x) return;
        if (need_w) {
          Tensor<T> cols({rows, kkc});
          im2col(geo, g.node(xi).val.ptr(), cols.ptr());
          gemm(cols.ptr(), gy.ptr(), g.gslot(wi)->ptr(), kkc, rows, geo.cout,
               true, false, true);
        }
        if (need_x) {
          Tensor<T> dcols({rows, kkc});
          gemm(gy.ptr(), g.node(wi).val.ptr(), dcols.ptr(), rows, geo.cout,
               kkc, false, true, false);
          col2im(geo, dcols.ptr(), g.gslot(xi)->ptr());
        }
      };
    return wrap(id);
  }

  Var<T> tconv2d(Var<T> x, Var<T> w, Var<T> b, int stride) {
    Tensor<T> y = ::ariw::transposed_conv2d(val(x), val(w), val(b), stride);
    std::vector<int> big = y.shape;
    ConvGeom geo = conv_geometry(big, val(w).shape, stride, Pad::kSame);
    bool rg = rg2(x, w) || needs_grad(b);
    int id = push(std::move(y), rg);
    if (rg)
      node(id).back = [xi = x.id, wi = w.id, bi = b.id, yi = id,
                       geo](Graph& g) {
        const Tensor<T>& gy = g.node(yi).grad;  // [H,W,cin]
        const int rows = geo.oh * geo.ow, kkc = geo.k * geo.k * geo.cin;
        if (Tensor<T>* gb = g.gslot(bi)) {
          for (int64_t p = 0; p < static_cast<int64_t>(geo.h) * geo.w; ++p)
            for (int c = 0; c < geo.cin; ++c) (*gb)[c] += gy[p * geo.cin + c];
        }
        const bool need_w = g.gslot(wi) != nullptr;
        const bool need_x = g.gslot(xi) != nullptr;
        if (!need_w && !need_x) return;
        Tensor<T> gcols({rows, kkc});
        im2col(geo, gy.ptr(), gcols.ptr());
        if (need_x)
          gemm(gcols.ptr(), g.node(wi).val.ptr(), g.gslot(xi)->ptr(), rows,
               kkc, geo.cout, false, false, true);
        if (need_w)
          gemm(gcols.ptr(), g.node(xi).val.ptr(), g.gslot(wi)->ptr(), kkc,
               rows, geo.cout, true, false, true);
      };
    return wrap(id);
  }

  Var<T> matvec(Var<T> x, Var<T> w, Var<T> b) {
    const Tensor<T>&vx = val(x), &vw = val(w), &vb = val(b);
    ARIW_CHECK(vx.rank() == 1 && vw.rank() == 2 && vb.rank() == 1 &&
                   vw.shape[0] == vx.shape[0] && vw.shape[1] == vb.shape[0],
               "matvec: shapes {} {} {}", shape_str(vx.shape),
               shape_str(vw.shape), shape_str(vb.shape));
    const int n = vx.shape[0], m = vw.shape[1];
    Tensor<T> y = vb;
    gemm(vx.ptr(), vw.ptr(), y.ptr(), 1, n, m, false, false, true);
    bool rg = rg2(x, w) || needs_grad(b);
    int id = push(std::move(y), rg);
    if (rg)
      node(id).back = [xi = x.id, wi = w.id, bi = b.id, yi = id, n,
                       m](Graph& g) {
        const Tensor<T>& gy = g.node(yi).grad;
        if (Tensor<T>* gb = g.gslot(bi))
          for (int j = 0; j < m; ++j) (*gb)[j] += gy[j];
        if (Tensor<T>* gx = g.gslot(xi))
          gemm(g.node(wi).val.ptr(), gy.ptr(), gx->ptr(), n, m, 1, false,
               false, true);
        if (Tensor<T>* gw = g.gslot(wi))
          gemm(g.node(xi).val.ptr(), gy.ptr(), gw->ptr(), n, 1, m, true,
               false, true);
      };
    return wrap(id);
  }

  // ------------------------------------------------------------ activations
  Var<T> act_lrelu(Var<T> x, T slope) {
    Tensor<T> y = val(x);
    for (T& v : y.data) v = v > T(0) ? v : slope * v;
    int id = push(std::move(y), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id, slope](Graph& g) {
        if (Tensor<T>* gx = g.gslot(xi)) {
          const Tensor<T>& gy = g.node(yi).grad;
          const Tensor<T>& vx = g.node(xi).val;
          for (int64_t i = 0; i < gy.numel(); ++i)
            (*gx)[i] += gy[i] * (vx[i] > T(0) ? T(1) : slope);
        }
      };
    return wrap(id);
  }
  Var<T> act_tanh(Var<T> x) {
    Tensor<T> y = val(x);
    for (T& v : y.data) v = std::tanh(v);
    int id = push(std::move(y), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id](Graph& g) {
        if (Tensor<T>* gx = g.gslot(xi)) {
          const Tensor<T>& gy = g.node(yi).grad;
          const Tensor<T>& vy = g.node(yi).val;
          for (int64_t i = 0; i < gy.numel(); ++i)
            (*gx)[i] += gy[i] * (T(1) - vy[i] * vy[i]);
        }
      };
    return wrap(id);
  }
  Var<T> act_sigmoid(Var<T> x) {
    Tensor<T> y = val(x);
    for (T& v : y.data)
      v = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
    int id = push(std::move(y), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id](Graph& g) {
        if (Tensor<T>* gx = g.gslot(xi)) {
          const Tensor<T>& gy = g.node(yi).grad;
          const Tensor<T>& vy = g.node(yi).val;
          for (int64_t i = 0; i < gy.numel(); ++i)
            (*gx)[i] += gy[i] * vy[i] * (T(1) - vy[i]);
        }
      };
    return wrap(id);
  }

  // ------------------------------------------------------- shape and motion
  Var<T> reshape(Var<T> x, std::vector<int> shape) {
    Tensor<T> y = val(x).reshaped(shape);
    int id = push(std::move(y), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id](Graph& g) {
        if (Tensor<T>* gx = g.gslot(xi)) {
          const Tensor<T>& gy = g.node(yi).grad;
          for (int64_t i = 0; i < gy.numel(); ++i) (*gx)[i] += gy[i];
        }
      };
    return wrap(id);
  }

  Var<T> upsample(Var<T> x, int d) {
    Tensor<T> y = upsample_nearest(val(x), d);
    int id = push(std::move(y), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id, d](Graph& g) {
        if (Tensor<T>* gx = g.gslot(xi)) {
          const Tensor<T>& gy = g.node(yi).grad;
          const int oh = gy.shape[0], ow = gy.shape[1], c = gy.shape[2];
          for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j)
              for (int ch = 0; ch < c; ++ch)
                gx->at(i / d, j / d, ch) += gy.at(i, j, ch);
        }
      };
    return wrap(id);
  }

  Var<T> resize_bl(Var<T> x, int oh, int ow) {
    const Tensor<T>& vx = val(x);
    const int h = vx.shape[0], w = vx.shape[1], c = vx.shape[2];
    Tensor<T> y = resize_image(vx, oh, ow, Resize::kBilinear);
    int id = push(std::move(y), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id, oh, ow, h, w, c](Graph& g) {
        Tensor<T>* gx = g.gslot(xi);
        if (!gx) return;
        const Tensor<T>& gy = g.node(yi).grad;
        if (oh == h && ow == w) {
          for (int64_t i = 0; i < gy.numel(); ++i) (*gx)[i] += gy[i];
          return;
        }
        for (int i = 0; i < oh; ++i) {
          ResizeTap ty = resize_tap(i, h, oh);
          for (int j = 0; j < ow; ++j) {
            ResizeTap tx = resize_tap(j, w, ow);
            for (int ch = 0; ch < c; ++ch) {
              double gyv = gy.at(i, j, ch);
              gx->at(ty.lo, tx.lo, ch) +=
                  static_cast<T>(gyv * (1 - ty.w_hi) * (1 - tx.w_hi));
              gx->at(ty.lo, tx.hi, ch) +=
                  static_cast<T>(gyv * (1 - ty.w_hi) * tx.w_hi);
              gx->at(ty.hi, tx.lo, ch) +=
                  static_cast<T>(gyv * ty.w_hi * (1 - tx.w_hi));
              gx->at(ty.hi, tx.hi, ch) +=
                  static_cast<T>(gyv * ty.w_hi * tx.w_hi);
            }
          }
        }
      };
    return wrap(id);
  }

  // --------------------------------------------------- straight-through ops
  Var<T> clamp01_ste(Var<T> x) {
    Tensor<T> y = val(x);
    for (T& v : y.data) v = std::min(T(1), std::max(T(0), v));
    int id = push(std::move(y), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id](Graph& g) {
        g.axpy(xi, g.node(yi).grad, T(1));
      };
    return wrap(id);
  }
  Var<T> round_ste(Var<T> x) {
    Tensor<T> y = val(x);
    for (T& v : y.data) v = std::round(v);
    int id = push(std::move(y), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id](Graph& g) {
        g.axpy(xi, g.node(yi).grad, T(1));
      };
    return wrap(id);
  }

  // ------------------------------------------------------------- JPEG parts
  // Replicate-pad at bottom/right edges only (block alignment).
  Var<T> pad_br(Var<T> x, int pb, int pr) {
    const Tensor<T>& vx = val(x);
    ARIW_CHECK(vx.rank() == 3 && pb >= 0 && pr >= 0, "pad_br: bad arguments");
    const int h = vx.shape[0], w = vx.shape[1], c = vx.shape[2];
    Tensor<T> y({h + pb, w + pr, c});
    for (int i = 0; i < h + pb; ++i)
      for (int j = 0; j < w + pr; ++j) {
        const T* src = &vx.at(std::min(i, h - 1), std::min(j, w - 1), 0);
        std::copy(src, src + c, &y.at(i, j, 0));
      }
    int id = push(std::move(y), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id, h, w, c, pb, pr](Graph& g) {
        if (Tensor<T>* gx = g.gslot(xi)) {
          const Tensor<T>& gy = g.node(yi).grad;
          for (int i = 0; i < h + pb; ++i)
            for (int j = 0; j < w + pr; ++j)
              for (int ch = 0; ch < c; ++ch)
                gx->at(std::min(i, h - 1), std::min(j, w - 1), ch) +=
                    gy.at(i, j, ch);
        }
      };
    return wrap(id);
  }

  Var<T> crop_tl(Var<T> x, int oh, int ow) {
    const Tensor<T>& vx = val(x);
    ARIW_CHECK(vx.rank() == 3 && oh <= vx.shape[0] && ow <= vx.shape[1],
               "crop_tl: target larger than input");
    const int c = vx.shape[2];
    Tensor<T> y({oh, ow, c});
    for (int i = 0; i < oh; ++i)
      std::copy(&vx.at(i, 0, 0), &vx.at(i, 0, 0) + static_cast<size_t>(ow) * c,
                &y.at(i, 0, 0));
    int id = push(std::move(y), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id, oh, ow, c](Graph& g) {
        if (Tensor<T>* gx = g.gslot(xi)) {
          const Tensor<T>& gy = g.node(yi).grad;
          for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j)
              for (int ch = 0; ch < c; ++ch)
                gx->at(i, j, ch) += gy.at(i, j, ch);
        }
      };
    return wrap(id);
  }

  // Blockwise orthonormal 8x8 DCT-II per channel; inverse is the transpose.
  Var<T> dct8(Var<T> x, bool inverse) {
    Tensor<T> y = dct8_apply(val(x), inverse);
    int id = push(std::move(y), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id, inverse](Graph& g) {
        if (Tensor<T>* gx = g.gslot(xi)) {
          Tensor<T> d = dct8_apply(g.node(yi).grad, !inverse);
          for (int64_t i = 0; i < d.numel(); ++i) (*gx)[i] += d[i];
        }
      };
    return wrap(id);
  }

  Var<T> rgb_to_ycbcr(Var<T> x) { return color3(x, true); }
  Var<T> ycbcr_to_rgb(Var<T> x) { return color3(x, false); }

  // Depthwise convolution with one shared 2-D kernel, replicate padding.
  Var<T> blur_depthwise(Var<T> x, Tensor<T> kernel) {
    const Tensor<T>& vx = val(x);
    ARIW_CHECK(kernel.rank() == 2 && kernel.shape[0] == kernel.shape[1] &&
                   kernel.shape[0] % 2 == 1,
               "blur: kernel must be odd square, got {}",
               shape_str(kernel.shape));
    const int h = vx.shape[0], w = vx.shape[1], c = vx.shape[2];
    Tensor<T> y = depthwise_replicate(vx, kernel);
    int id = push(std::move(y), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id, kernel = std::move(kernel), h, w,
                       c](Graph& g) {
        Tensor<T>* gx = g.gslot(xi);
        if (!gx) return;
        const Tensor<T>& gy = g.node(yi).grad;
        const int k = kernel.shape[0], r = k / 2;
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                int si = std::min(std::max(i + ky - r, 0), h - 1);
                int sj = std::min(std::max(j + kx - r, 0), w - 1);
                T kv = kernel.at(ky, kx);
                for (int ch = 0; ch < c; ++ch)
                  gx->at(si, sj, ch) += kv * gy.at(i, j, ch);
              }
      };
    return wrap(id);
  }

  // -------------------------------------------------------------- reductions
  Var<T> sum_all(Var<T> x) {
    double s = 0;
    for (T v : val(x).data) s += static_cast<double>(v);
    int id = push(Tensor<T>({1}, static_cast<T>(s)), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id](Graph& g) {
        if (Tensor<T>* gx = g.gslot(xi)) {
          T gyv = g.node(yi).grad[0];
          for (int64_t i = 0; i < gx->numel(); ++i) (*gx)[i] += gyv;
        }
      };
    return wrap(id);
  }
  Var<T> mean_all(Var<T> x) { return scale(sum_all(x), T(1) / T(val(x).numel())); }

  Var<T> mse(Var<T> a, Var<T> b) {
    const Tensor<T>&va = val(a), &vb = val(b);
    ARIW_CHECK(va.same_shape(vb), "mse: shape {} vs {}", shape_str(va.shape),
               shape_str(vb.shape));
    double s = 0;
    for (int64_t i = 0; i < va.numel(); ++i) {
      double d = static_cast<double>(va[i]) - static_cast<double>(vb[i]);
      s += d * d;
    }
    const double n = static_cast<double>(va.numel());
    int id = push(Tensor<T>({1}, static_cast<T>(s / n)), rg2(a, b));
    if (node(id).rg)
      node(id).back = [ai = a.id, bi = b.id, yi = id, n](Graph& g) {
        T gyv = g.node(yi).grad[0];
        const Tensor<T>&va2 = g.node(ai).val, &vb2 = g.node(bi).val;
        T f = static_cast<T>(2.0 / n) * gyv;
        if (Tensor<T>* ga = g.gslot(ai))
          for (int64_t i = 0; i < va2.numel(); ++i)
            (*ga)[i] += f * (va2[i] - vb2[i]);
        if (Tensor<T>* gb = g.gslot(bi))
          for (int64_t i = 0; i < va2.numel(); ++i)
            (*gb)[i] -= f * (va2[i] - vb2[i]);
      };
    return wrap(id);
  }

  // Mean binary cross-entropy against a constant 0/1 target, eps-clipped.
  Var<T> bce_mean(Var<T> pred, Tensor<T> target, T eps) {
    const Tensor<T>& vp = val(pred);
    ARIW_CHECK(vp.same_shape(target), "bce: shape {} vs {}",
               shape_str(vp.shape), shape_str(target.shape));
    const int64_t n = vp.numel();
    double s = 0;
    for (int64_t i = 0; i < n; ++i) {
      double p = clip(static_cast<double>(vp[i]), static_cast<double>(eps));
      double t = static_cast<double>(target[i]);
      s += -(t * std::log(p) + (1 - t) * std::log(1 - p));
    }
    int id = push(Tensor<T>({1}, static_cast<T>(s / static_cast<double>(n))),
                  needs_grad(pred));
    if (node(id).rg)
      node(id).back = [pi = pred.id, yi = id, target = std::move(target), eps,
                       n](Graph& g) {
        if (Tensor<T>* gp = g.gslot(pi)) {
          T gyv = g.node(yi).grad[0];
          const Tensor<T>& vp2 = g.node(pi).val;
          for (int64_t i = 0; i < n; ++i) {
            double p = static_cast<double>(vp2[i]);
            if (p < static_cast<double>(eps) ||
                p > 1.0 - static_cast<double>(eps))
              continue;  // flat in the clipped region
            double t = static_cast<double>(target[i]);
            (*gp)[i] += gyv * static_cast<T>((p - t) / (p * (1.0 - p)) /
                                             static_cast<double>(n));
          }
        }
      };
    return wrap(id);
  }

  // 1/PSNR from a scalar MSE on the [0,1] pixel scale; PSNR is evaluated on
  // the [0,255] scale and capped at 100 dB, which zeroes the gradient there.
  Var<T> inv_psnr(Var<T> mse01) {
    ARIW_CHECK(val(mse01).numel() == 1, "inv_psnr: input must be scalar");
    const double m = static_cast<double>(val(mse01)[0]);
    const double kCap = 1e-10;
    const double psnr = 10.0 * std::log10(1.0 / std::max(m, kCap));
    int id = push(Tensor<T>({1}, static_cast<T>(1.0 / psnr)),
                  needs_grad(mse01));
    if (node(id).rg)
      node(id).back = [mi = mse01.id, yi = id, m, psnr, kCap](Graph& g) {
        if (Tensor<T>* gm = g.gslot(mi)) {
          if (m <= kCap) return;
          double d = 10.0 / (psnr * psnr * m * std::log(10.0));
          (*gm)[0] += g.node(yi).grad[0] * static_cast<T>(d);
        }
      };
    return wrap(id);
  }

  Var<T> softmax1d(Var<T> x) {
    const Tensor<T>& vx = val(x);
    ARIW_CHECK(vx.rank() == 1, "softmax: input must be rank-1");
    double mx = -1e300;
    for (T v : vx.data) mx = std::max(mx, static_cast<double>(v));
    double z = 0;
    Tensor<T> y = vx;
    for (int64_t i = 0; i < vx.numel(); ++i) {
      double e = std::exp(static_cast<double>(vx[i]) - mx);
      y[i] = static_cast<T>(e);
      z += e;
    }
    for (T& v : y.data) v = static_cast<T>(static_cast<double>(v) / z);
    int id = push(std::move(y), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id](Graph& g) {
        if (Tensor<T>* gx = g.gslot(xi)) {
          const Tensor<T>&vy = g.node(yi).val, &gy = g.node(yi).grad;
          double dot = 0;
          for (int64_t i = 0; i < vy.numel(); ++i)
            dot += static_cast<double>(gy[i]) * static_cast<double>(vy[i]);
          for (int64_t i = 0; i < vy.numel(); ++i)
            (*gx)[i] += static_cast<T>(static_cast<double>(vy[i]) *
                                       (static_cast<double>(gy[i]) - dot));
        }
      };
    return wrap(id);
  }

  // Channel-wise sum and product across maps of equal shape [r,r,c]:
  // output [r,r,2c] = concat(sum_i maps_i, prod_i maps_i).
  Var<T> sumprod(const std::vector<Var<T>>& maps) {
    ARIW_CHECK(!maps.empty(), "sumprod: empty map list");
    const Tensor<T>& v0 = val(maps[0]);
    ARIW_CHECK(v0.rank() == 3, "sumprod: maps must be rank-3");
    bool rg = false;
    for (Var<T> mvar : maps) {
      ARIW_CHECK(val(mvar).same_shape(v0), "sumprod: map shape mismatch");
      rg = rg || needs_grad(mvar);
    }
    const int h = v0.shape[0], w = v0.shape[1], c = v0.shape[2];
    const int64_t px = static_cast<int64_t>(h) * w;
    Tensor<T> y({h, w, 2 * c});
    const size_t l = maps.size();
    for (int64_t p = 0; p < px; ++p)
      for (int ch = 0; ch < c; ++ch) {
        double s = 0, pr = 1;
        for (size_t k = 0; k < l; ++k) {
          double v = val(maps[k])[p * c + ch];
          s += v;
          pr *= v;
        }
        y[p * 2 * c + ch] = static_cast<T>(s);
        y[p * 2 * c + c + ch] = static_cast<T>(pr);
      }
    int id = push(std::move(y), rg);
    if (rg) {
      std::vector<int> ids;
      for (Var<T> mvar : maps) ids.push_back(mvar.id);
      node(id).back = [ids, yi = id, h, w, c](Graph& g) {
        const Tensor<T>& gy = g.node(yi).grad;
        const int64_t px = static_cast<int64_t>(h) * w;
        const size_t l = ids.size();
        std::vector<double> vals(l);
        for (int64_t p = 0; p < px; ++p)
          for (int ch = 0; ch < c; ++ch) {
            for (size_t k = 0; k < l; ++k)
              vals[k] = g.node(ids[k]).val[p * c + ch];
            double gs = gy[p * 2 * c + ch];
            double gp = gy[p * 2 * c + c + ch];
            for (size_t k = 0; k < l; ++k) {
              Tensor<T>* gm = g.gslot(ids[k]);
              if (!gm) continue;
              double rest = 1;
              for (size_t q = 0; q < l; ++q)
                if (q != k) rest *= vals[q];
              (*gm)[p * c + ch] += static_cast<T>(gs + gp * rest);
            }
          }
      };
    }
    return wrap(id);
  }

 private:
  struct Node {
    Tensor<T> val;
    Tensor<T> grad;
    bool rg = false;
    std::function<void(Graph&)> back;
  };

  void check(Var<T> x) const {
    ARIW_CHECK(x.g == this && x.id >= 0 &&
                   x.id < static_cast<int>(nodes_.size()),
               "autodiff: variable does not belong to this graph");
  }
  Var<T> wrap(int id) { return Var<T>{this, id}; }
  int push(Tensor<T> v, bool rg) {
    Node n;
    n.val = std::move(v);
    n.rg = rg;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }
  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
  bool rg2(Var<T> a, Var<T> b) { return needs_grad(a) || needs_grad(b); }

  Tensor<T>& gbuf(int id) {
    Node& n = node(id);
    if (n.grad.empty()) n.grad = Tensor<T>::zeros(n.val.shape);
    return n.grad;
  }
  Tensor<T>* gslot(int id) {
    Node& n = node(id);
    if (!n.rg) return nullptr;
    return &gbuf(id);
  }
  void axpy(int id, const Tensor<T>& d, T s) {
    if (Tensor<T>* g = gslot(id)) {
      for (int64_t i = 0; i < d.numel(); ++i) (*g)[i] += s * d[i];
    }
  }

  template <typename F, typename B>
  Var<T> ewise2(Var<T> a, Var<T> b, F f, B back) {
    const Tensor<T>&va = val(a), &vb = val(b);
    ARIW_CHECK(va.same_shape(vb), "elementwise: shape {} vs {}",
               shape_str(va.shape), shape_str(vb.shape));
    Tensor<T> y = va;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = f(va[i], vb[i]);
    int id = push(std::move(y), rg2(a, b));
    if (node(id).rg)
      node(id).back = [ai = a.id, bi = b.id, yi = id, back](Graph& g) {
        back(g, ai, bi, g.node(yi).grad);
      };
    return wrap(id);
  }

  Var<T> color3(Var<T> x, bool forward) {
    Tensor<T> y = color_convert(val(x), forward);
    int id = push(std::move(y), needs_grad(x));
    if (node(id).rg)
      node(id).back = [xi = x.id, yi = id, forward](Graph& g) {
        if (Tensor<T>* gx = g.gslot(xi)) {
          const Tensor<T>& gy = g.node(yi).grad;
          const double* m = color_matrix(forward);
          const int64_t px2 = gy.numel() / 3;
          for (int64_t p = 0; p < px2; ++p)
            for (int i = 0; i < 3; ++i) {
              double s = 0;
              for (int j = 0; j < 3; ++j)
                s += m[j * 3 + i] * static_cast<double>(gy[p * 3 + j]);
              (*gx)[p * 3 + i] += static_cast<T>(s);
            }
        }
      };
    return wrap(id);
  }

  static double clip(double p, double eps) {
    return std::min(1.0 - eps, std::max(eps, p));
  }

  std::vector<Node> nodes_;
};

}  // namespace ariw::ad

#endif  // ARIW_AUTODIFF_HPP_

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

#ifndef ARIW_ENCODER_HPP_
#define ARIW_ENCODER_HPP_

#include <string>
#include <utility>
#include <vector>

#include "ariw/autodiff.hpp"
#include "ariw/gradmap.hpp"
#include "ariw/model.hpp"
#include "ariw/wm_codec.hpp"

namespace ariw {

inline constexpr double kLReluSlope = 0.2;

template <typename T>
struct LayerVars {
  ad::Var<T> w, b;
};

// Graph-side mirror of ModelParams. When `trainable`, `flat` pairs each
// parameter tensor with its leaf so the optimizer can route gradients back.
template <typename T>
struct ParamVars {
  LayerVars<T> proj;
  std::vector<LayerVars<T>> trunk;
  std::vector<std::array<LayerVars<T>, 2>> heads;
  std::vector<LayerVars<T>> dec;
  std::vector<LayerVars<T>> decouple;
  LayerVars<T> dense;
  std::vector<std::pair<Tensor<T>*, ad::Var<T>>> flat;
};

template <typename T>
ParamVars<T> load_params(ad::Graph<T>& g, ModelParams<T>& m, bool trainable) {
  ParamVars<T> pv;
  auto lift = [&](Tensor<T>& t) {
    ad::Var<T> v = g.leaf(t, trainable);
    if (trainable) pv.flat.emplace_back(&t, v);
    return v;
  };
  pv.proj = {lift(m.proj_w), lift(m.proj_b)};
  for (auto& l : m.trunk) pv.trunk.push_back({lift(l.w), lift(l.b)});
  for (auto& h : m.heads)
    pv.heads.push_back({LayerVars<T>{lift(h[0].w), lift(h[0].b)},
                        LayerVars<T>{lift(h[1].w), lift(h[1].b)}});
  for (auto& l : m.dec) pv.dec.push_back({lift(l.w), lift(l.b)});
  for (auto& l : m.decouple) pv.decouple.push_back({lift(l.w), lift(l.b)});
  pv.dense = {lift(m.dense_w), lift(m.dense_b)};
  return pv;
}

// Shared trunk with the watermark re-concatenated before every layer, then
// one two-conv head per attack branch (final head layer linear).
template <typename T>
std::vector<ad::Var<T>> encode_branches_g(ad::Graph<T>& g, ad::Var<T> state,
                                          ad::Var<T> wm,
                                          const ParamVars<T>& pv) {
  ARIW_CHECK(g.val(state).same_shape(g.val(wm)),
             "encode: state {} vs watermark {}",
             shape_str(g.val(state).shape), shape_str(g.val(wm).shape));
  ad::Var<T> h = state;
  for (const LayerVars<T>& l : pv.trunk)
    h = g.act_lrelu(g.conv2d(g.concat_ch({h, wm}), l.w, l.b, 1, Pad::kSame),
                    T(kLReluSlope));
  std::vector<ad::Var<T>> branches;
  branches.reserve(pv.heads.size());
  for (const auto& head : pv.heads) {
    ad::Var<T> t = g.act_lrelu(
        g.conv2d(g.concat_ch({h, wm}), head[0].w, head[0].b, 1, Pad::kSame),
        T(kLReluSlope));
    branches.push_back(
        g.conv2d(g.concat_ch({t, wm}), head[1].w, head[1].b, 1, Pad::kSame));
  }
  return branches;
}

// Softmax over branch scores, stabilized by max subtraction.
inline std::vector<double> robust_weights(const std::vector<double>& scores) {
  ARIW_CHECK(!scores.empty(), "robust_weights: empty scores");
  double mx = scores[0];
  for (double s : scores) {
    ARIW_CHECK(std::isfinite(s), "robust_weights: non-finite score");
    mx = std::max(mx, s);
  }
  std::vector<double> w(scores.size());
  double z = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp(scores[i] - mx);
    z += w[i];
  }
  for (double& v : w) v /= z;
  return w;
}

// alpha * sum_i w_i * (g o branch_i), in branch order.
template <typename T>
ad::Var<T> compose_g(ad::Graph<T>& g, const std::vector<ad::Var<T>>& branches,
                     const std::vector<double>& weights, const Tensor<T>& gmap,
                     double alpha) {
  ARIW_CHECK(branches.size() == weights.size(),
             "compose: {} branches vs {} weights", branches.size(),
             weights.size());
  double sum = 0;
  for (double w : weights) sum += w;
  ARIW_CHECK(std::abs(sum - 1.0) < 1e-6, "compose: weights sum to {}", sum);
  ad::Var<T> acc;
  for (size_t i = 0; i < branches.size(); ++i) {
    ad::Var<T> term = g.scale(g.mul_const(branches[i], gmap),
                              static_cast<T>(weights[i]));
    acc = i == 0 ? term : g.add(acc, term);
  }
  return g.scale(acc, static_cast<T>(alpha));
}

template <typename T>
Tensor<T> compose(const std::vector<Tensor<T>>& branches,
                  const std::vector<double>& weights, const Tensor<T>& gmap,
                  double alpha) {
  ad::Graph<T> g;
  std::vector<ad::Var<T>> vars;
  vars.reserve(branches.size());
  for (const Tensor<T>& b : branches) vars.push_back(g.constant(b));
  return g.val(compose_g(g, vars, weights, gmap, alpha));
}

// Embedding-strength map for one (image, payload) pair. Autodiff mode
// differentiates the summed composed residual with the image standing in as
// the iteration state; scale factors cancel in the min-max normalization.
template <typename T>
Tensor<T> gradient_map(ModelParams<T>& model, const Tensor<T>& cover,
                       const WatermarkBits& bits) {
  const GradMode gm = model.cfg.grad;
  if (!gm.enabled) return Tensor<T>::ones(cover.shape);
  if (gm.mode == GradMode::Kind::kSobel)
    return normalize_gradient(sobel_magnitude(cover));
  Tensor<T> ones = Tensor<T>::ones(cover.shape);
  Tensor<T> raw = raw_gradient_autodiff<T>(
      cover, [&](ad::Graph<T>& g, ad::Var<T> x) {
        ParamVars<T> pv = load_params(g, model, false);
        ad::Var<T> wm = expand_g(g, bits, model.cfg.expand(), pv.proj.w,
                                 pv.proj.b);
        std::vector<ad::Var<T>> branches = encode_branches_g(g, x, wm, pv);
        return g.sum_all(compose_g(g, branches, model.robust_ema, ones, 1.0));
      });
  return normalize_gradient(raw);
}

inline void check_init_kind(const std::string& kind) {
  ARIW_CHECK(kind == "ones" || kind == "zeros" || kind == "cover" ||
                 kind == "gaussian",
             "init state: unknown kind '{}' (ones|zeros|cover|gaussian)", kind);
}

template <typename T>
Tensor<T> init_state(const std::string& kind, const Tensor<T>& cover,
                     RngStream& rng) {
  if (kind == "ones") return Tensor<T>::ones(cover.shape);
  if (kind == "zeros") return Tensor<T>::zeros(cover.shape);
  if (kind == "cover") return cover;
  if (kind == "gaussian") {
    Tensor<T> t(cover.shape);
    for (T& v : t.data) v = static_cast<T>(rng.normal());
    return t;
  }
  fail("init state: unknown kind '{}' (ones|zeros|cover|gaussian)", kind);
}

template <typename T>
struct ResidualSet {
  std::vector<Tensor<T>> branches;
  std::vector<double> weights;
  Tensor<T> composed;
  double alpha = 0;
};

template <typename T>
struct EmbedResult {
  Tensor<T> image;
  ResidualSet<T> residuals;
};

// Inference embedding: iterate the residual from `init`, modulate by the
// gradient map, compose with the frozen robust-weight snapshot, then add to
// the cover and clamp.
template <typename T>
EmbedResult<T> embed(const Tensor<T>& cover, const WatermarkBits& bits,
                     ModelParams<T>& model, double alpha, int iters,
                     const Tensor<T>& init) {
  ARIW_CHECK(alpha >= 0, "embed: alpha {} must be >= 0", alpha);
  ARIW_CHECK(iters >= 1, "embed: iters {} must be >= 1", iters);
  const ModelConfig& cfg = model.cfg;
  ARIW_CHECK(cover.rank() == 3 && cover.shape[0] == cfg.image_size &&
                 cover.shape[1] == cfg.image_size &&
                 cover.shape[2] == cfg.channels,
             "embed: cover {} does not match model {}x{}x{}",
             shape_str(cover.shape), cfg.image_size, cfg.image_size,
             cfg.channels);
  ARIW_CHECK(static_cast<int>(bits.size()) == cfg.L,
             "embed: {} bits but model expects L={}", bits.size(), cfg.L);
  ARIW_CHECK(init.same_shape(cover), "embed: init state shape mismatch");

  Tensor<T> gmap = gradient_map(model, cover, bits);
  Tensor<T> state = init;
  EmbedResult<T> out;
  for (int k = 0; k < iters; ++k) {
    ad::Graph<T> g;
    ParamVars<T> pv = load_params(g, model, false);
    ad::Var<T> wm = expand_g(g, bits, cfg.expand(), pv.proj.w, pv.proj.b);
    std::vector<ad::Var<T>> branches =
        encode_branches_g(g, g.constant(state), wm, pv);
    ad::Var<T> composed =
        compose_g(g, branches, model.robust_ema, gmap, alpha);
    state = g.val(composed);
    if (k == iters - 1) {
      out.residuals.branches.clear();
      for (ad::Var<T> b : branches) out.residuals.branches.push_back(g.val(b));
      out.residuals.weights = model.robust_ema;
      out.residuals.composed = state;
      out.residuals.alpha = alpha;
    }
  }
  Tensor<T> img = cover;
  for (int64_t i = 0; i < img.numel(); ++i) img[i] += state[i];
  out.image = clamp01(std::move(img));
  check_finite(out.image, "embed");
  return out;
}

}  // namespace ariw

#endif  // ARIW_ENCODER_HPP_

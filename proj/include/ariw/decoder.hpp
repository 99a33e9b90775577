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

#ifndef ARIW_DECODER_HPP_
#define ARIW_DECODER_HPP_

#include <vector>

#include "ariw/encoder.hpp"

namespace ariw {

// Transposed-conv tower with a decouple head per layer. Heads end in tanh so
// the downstream product stays bounded; each map lands on the common grid.
template <typename T>
std::vector<ad::Var<T>> decode_layer_maps_g(ad::Graph<T>& g, ad::Var<T> img,
                                            const ParamVars<T>& pv, int grid) {
  ad::Var<T> h = img;
  std::vector<ad::Var<T>> maps;
  maps.reserve(pv.dec.size());
  for (size_t j = 0; j < pv.dec.size(); ++j) {
    h = g.act_lrelu(g.tconv2d(h, pv.dec[j].w, pv.dec[j].b, 1),
                    T(kLReluSlope));
    ad::Var<T> m = g.act_tanh(
        g.conv2d(h, pv.decouple[j].w, pv.decouple[j].b, 1, Pad::kSame));
    maps.push_back(g.resize_bl(m, grid, grid));
  }
  return maps;
}

// Aggregation: channel-wise sum and product across layer maps, flattened
// through the dense layer into L sigmoid logits.
template <typename T>
ad::Var<T> aggregate_g(ad::Graph<T>& g, const std::vector<ad::Var<T>>& maps,
                       const LayerVars<T>& dense) {
  ad::Var<T> sp = g.sumprod(maps);
  const Tensor<T>& v = g.val(sp);
  ad::Var<T> flat =
      g.reshape(sp, {v.shape[0] * v.shape[1] * v.shape[2]});
  return g.act_sigmoid(g.matvec(flat, dense.w, dense.b));
}

template <typename T>
ad::Var<T> decode_g(ad::Graph<T>& g, ad::Var<T> img, const ParamVars<T>& pv,
                    int grid) {
  return aggregate_g(g, decode_layer_maps_g(g, img, pv, grid), pv.dense);
}

template <typename T>
struct ExtractResult {
  std::vector<double> soft;
  WatermarkBits hard;
};

template <typename T>
ExtractResult<T> extract(const Tensor<T>& img, ModelParams<T>& model) {
  const ModelConfig& cfg = model.cfg;
  ARIW_CHECK(img.rank() == 3 && img.shape[0] == cfg.image_size &&
                 img.shape[1] == cfg.image_size &&
                 img.shape[2] == cfg.channels,
             "extract: image {} does not match model {}x{}x{}",
             shape_str(img.shape), cfg.image_size, cfg.image_size,
             cfg.channels);
  ad::Graph<T> g;
  ParamVars<T> pv = load_params(g, model, false);
  const Tensor<T>& soft = g.val(decode_g(g, g.constant(img), pv,
                                         cfg.map_grid()));
  ExtractResult<T> out;
  out.soft.reserve(soft.data.size());
  out.hard.reserve(soft.data.size());
  for (T v : soft.data) {
    out.soft.push_back(static_cast<double>(v));
    out.hard.push_back(static_cast<uint8_t>(v >= T(0.5) ? 1 : 0));
  }
  return out;
}

}  // namespace ariw

#endif  // ARIW_DECODER_HPP_

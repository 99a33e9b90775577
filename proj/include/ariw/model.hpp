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

#ifndef ARIW_MODEL_HPP_
#define ARIW_MODEL_HPP_

#include <array>
#include <string>
#include <vector>

#include "ariw/gradmap.hpp"
#include "ariw/rng.hpp"
#include "ariw/tensor.hpp"
#include "ariw/wm_codec.hpp"

namespace ariw {

struct ModelConfig {
  int image_size = 400;
  int channels = 3;
  int L = 100;
  int kernel_size = 3;
  std::vector<int> trunk_plan{32, 64, 128, 64};
  int head_hidden = 16;
  int n_branches = 8;
  int infer_iters = 2;
  GradMode grad;

  ExpandConfig expand() const {
    return ExpandConfig::defaults(image_size, channels, L);
  }
  // Common grid for decoder layer maps; matches the payload grid.
  int map_grid() const { return expand().grid_h; }

  void validate() const {
    ARIW_CHECK(image_size >= 16 && channels == 3 && L >= 1,
               "model config: bad image_size/channels/L");
    ARIW_CHECK(kernel_size == 1 || kernel_size == 3 || kernel_size == 5 ||
                   kernel_size == 7,
               "model config: kernel_size {} not in {{1,3,5,7}}", kernel_size);
    ARIW_CHECK(!trunk_plan.empty(), "model config: empty trunk plan");
    ARIW_CHECK(head_hidden >= 1 && n_branches >= 1 && infer_iters >= 1,
               "model config: bad head_hidden/n_branches/infer_iters");
    expand().validate(image_size, image_size, channels);
  }
};

template <typename T>
struct ConvLayer {
  Tensor<T> w;  // [k,k,cin,cout]
  Tensor<T> b;  // [cout]
};

template <typename T>
struct ModelParams {
  ModelConfig cfg;
  Tensor<T> proj_w, proj_b;
  std::vector<ConvLayer<T>> trunk;
  std::vector<std::array<ConvLayer<T>, 2>> heads;
  std::vector<ConvLayer<T>> dec;       // transposed-conv layers
  std::vector<ConvLayer<T>> decouple;  // per-layer map heads
  Tensor<T> dense_w, dense_b;
  std::vector<double> robust_ema;

  // Stable iteration over every trainable tensor as (name, tensor).
  template <typename F>
  void visit(F&& f) {
    f("proj.w", proj_w);
    f("proj.b", proj_b);
    for (size_t i = 0; i < trunk.size(); ++i) {
      f(fmt::format("trunk.{}.w", i), trunk[i].w);
      f(fmt::format("trunk.{}.b", i), trunk[i].b);
    }
    for (size_t i = 0; i < heads.size(); ++i)
      for (size_t j = 0; j < 2; ++j) {
        f(fmt::format("head.{}.{}.w", i, j), heads[i][j].w);
        f(fmt::format("head.{}.{}.b", i, j), heads[i][j].b);
      }
    for (size_t i = 0; i < dec.size(); ++i) {
      f(fmt::format("dec.{}.w", i), dec[i].w);
      f(fmt::format("dec.{}.b", i), dec[i].b);
    }
    for (size_t i = 0; i < decouple.size(); ++i) {
      f(fmt::format("decouple.{}.w", i), decouple[i].w);
      f(fmt::format("decouple.{}.b", i), decouple[i].b);
    }
    f("dense.w", dense_w);
    f("dense.b", dense_b);
  }

  // Decoder channel plan: encoder trunk reversed.
  static std::vector<int> dec_plan(const ModelConfig& cfg) {
    return {cfg.trunk_plan.rbegin(), cfg.trunk_plan.rend()};
  }

  static ModelParams init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    ModelParams p;
    p.cfg = cfg;
    const int c = cfg.channels, k = cfg.kernel_size;
    ExpandConfig ex = cfg.expand();

    auto gauss = [&](std::vector<int> shape, double std,
                     const std::string& name) {
      RngStream rng(seed, "init." + name);
      Tensor<T> t(std::move(shape));
      for (T& v : t.data) v = static_cast<T>(std * rng.normal());
      return t;
    };
    auto conv_he = [&](int cin, int cout, const std::string& name) {
      double std = std::sqrt(2.0 / (k * k * cin));
      return ConvLayer<T>{gauss({k, k, cin, cout}, std, name),
                          Tensor<T>::zeros({cout})};
    };

    p.proj_w = gauss({cfg.L, ex.L1}, 0.02, "proj.w");
    p.proj_b = Tensor<T>::zeros({ex.L1});

    int prev = 2 * c;
    for (size_t i = 0; i < cfg.trunk_plan.size(); ++i) {
      int cout = cfg.trunk_plan[i];
      p.trunk.push_back(conv_he(prev, cout, fmt::format("trunk.{}", i)));
      prev = cout + c;
    }
    for (int i = 0; i < cfg.n_branches; ++i) {
      ConvLayer<T> hid =
          conv_he(prev, cfg.head_hidden, fmt::format("head.{}.0", i));
      // Final head layers are linear and start small so the initial
      // residual is gentle.
      int hin = cfg.head_hidden + c;
      ConvLayer<T> out{
          gauss({k, k, hin, c}, 0.6 * std::sqrt(1.0 / (k * k * hin)),
                fmt::format("head.{}.1", i)),
          Tensor<T>::zeros({c})};
      p.heads.push_back({std::move(hid), std::move(out)});
    }

    std::vector<int> dplan = dec_plan(cfg);
    int din = c;
    for (size_t i = 0; i < dplan.size(); ++i) {
      int cout = dplan[i];
      // tconv kernel [k,k,cin,cout] consumes cout channels, emits cin.
      double std = std::sqrt(2.0 / (k * k * din));
      p.dec.push_back(ConvLayer<T>{
          gauss({k, k, cout, din}, std, fmt::format("dec.{}", i)),
          Tensor<T>::zeros({cout})});
      p.decouple.push_back(ConvLayer<T>{
          gauss({k, k, cout, c}, std::sqrt(1.0 / (k * k * cout)),
                fmt::format("decouple.{}", i)),
          Tensor<T>::zeros({c})});
      din = cout;
    }

    const int r = cfg.map_grid();
    const int din_dense = 2 * r * r * c;
    p.dense_w =
        gauss({din_dense, cfg.L}, std::sqrt(1.0 / din_dense), "dense.w");
    p.dense_b = Tensor<T>::zeros({cfg.L});

    p.robust_ema.assign(static_cast<size_t>(cfg.n_branches),
                        1.0 / cfg.n_branches);
    return p;
  }
};

}  // namespace ariw

#endif  // ARIW_MODEL_HPP_

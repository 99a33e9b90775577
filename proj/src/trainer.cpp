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

#include "ariw/trainer.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>

#include "ariw/attacks.hpp"
#include "ariw/decoder.hpp"
#include "ariw/encoder.hpp"

namespace ariw {

TrainSession::TrainSession(const TrainConfig& c, size_t n_images)
    : cfg(c),
      model(ModelParams<real>::init(c.model_config(), c.seed)),
      bits_rng(c.seed, "train.bits"),
      init_rng(c.seed, "train.init") {
  cfg.validate();
  ARIW_CHECK(n_images >= 1, "train: empty dataset");
  state_cache.resize(n_images);
  cache_valid.assign(n_images, 0);
  const auto& specs = cfg.attack_suite.specs;
  opt.m.resize(0);
  opt.v.resize(0);
  attack_rngs.reserve(specs.size());
  for (size_t i = 0; i < specs.size(); ++i)
    attack_rngs.emplace_back(
        cfg.seed, fmt::format("train.attack.{}.{}", i, specs[i].name()));
}

namespace {

double finite_term(double v, const char* name, int64_t step) {
  ARIW_CHECK(std::isfinite(v), "train: loss term {} is non-finite at step {}",
             name, step);
  return v;
}

}  // namespace

LossBreakdown TrainSession::train_step(const Tensor<real>& image,
                                       size_t image_idx) {
  ARIW_CHECK(image_idx < state_cache.size(), "train: image index out of range");
  const size_t n_att = cfg.attack_suite.specs.size();
  const int grid = model.cfg.map_grid();
  const LossWeights& lw = cfg.loss_weights;

  WatermarkBits bits = random_bits(cfg.L, bits_rng);
  Tensor<real> bits_t = bits_tensor<real>(bits);
  Tensor<real> gmap = gradient_map(model, image, bits);
  Tensor<real> state0 = cache_valid[image_idx]
                            ? state_cache[image_idx]
                            : init_state(cfg.init_kind, image, init_rng);

  ad::Graph<real> g;
  ParamVars<real> pv = load_params(g, model, true);
  ad::Var<real> wm =
      expand_g(g, bits, model.cfg.expand(), pv.proj.w, pv.proj.b);
  std::vector<ad::Var<real>> branches =
      encode_branches_g(g, g.constant(state0), wm, pv);
  ad::Var<real> composed =
      compose_g(g, branches, model.robust_ema, gmap, cfg.alpha_train);
  ad::Var<real> cover = g.constant(image);
  ad::Var<real> wm_img = g.clamp01_ste(g.add(cover, composed));

  ad::Var<real> l1 = g.mse(wm_img, cover);
  ad::Var<real> l2 = g.inv_psnr(l1);
  ad::Var<real> soft_clean = decode_g(g, wm_img, pv, grid);
  ad::Var<real> l3 = g.bce_mean(soft_clean, bits_t, real(kBceEps));

  std::vector<ad::Var<real>> ce;
  ce.reserve(n_att);
  ad::Var<real> l4;
  for (size_t i = 0; i < n_att; ++i) {
    AttackSpec spec = cfg.attack_suite.specs[i];
    spec.differentiable = true;
    ad::Var<real> ci;
    if (spec.kind == AttackSpec::Kind::kIdentity) {
      ci = l3;  // identity decode is exactly the clean decode
    } else {
      ad::Var<real> att = apply_attack_g(g, wm_img, cover, spec, attack_rngs[i]);
      ci = g.bce_mean(decode_g(g, att, pv, grid), bits_t, real(kBceEps));
    }
    ce.push_back(ci);
    l4 = i == 0 ? ci : g.add(l4, ci);
  }
  ad::Var<real> total =
      g.add(g.add(g.scale(l1, real(lw.l1)), g.scale(l2, real(lw.l2))),
            g.add(g.scale(l3, real(lw.l3)), g.scale(l4, real(lw.l4))));

  LossBreakdown b;
  b.l1_mse = finite_term(g.val(l1)[0], "l1_mse", step);
  b.l2_inv_psnr = finite_term(g.val(l2)[0], "l2_inv_psnr", step);
  b.l3_global_ce = finite_term(g.val(l3)[0], "l3_global_ce", step);
  for (size_t i = 0; i < n_att; ++i)
    b.per_branch_ce.push_back(finite_term(
        g.val(ce[i])[0], cfg.attack_suite.specs[i].name(), step));
  b.l4_local_ce_sum = finite_term(g.val(l4)[0], "l4_local_ce_sum", step);
  b.total = finite_term(g.val(total)[0], "total", step);

  g.backward(total);

  opt.t += 1;
  if (opt.m.empty()) {
    opt.m.resize(pv.flat.size());
    opt.v.resize(pv.flat.size());
    for (size_t s = 0; s < pv.flat.size(); ++s) {
      opt.m[s].assign(pv.flat[s].first->data.size(), 0.0);
      opt.v[s].assign(pv.flat[s].first->data.size(), 0.0);
    }
  }
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));
  for (size_t s = 0; s < pv.flat.size(); ++s) {
    Tensor<real>& p = *pv.flat[s].first;
    Tensor<real> grad = g.grad_or_zeros(pv.flat[s].second);
    std::vector<double>& m = opt.m[s];
    std::vector<double>& v = opt.v[s];
    for (size_t j = 0; j < p.data.size(); ++j) {
      double gj = grad[static_cast<int64_t>(j)];
      ARIW_CHECK(std::isfinite(gj), "train: non-finite gradient at step {}",
                 step);
      m[j] = opt.beta1 * m[j] + (1.0 - opt.beta1) * gj;
      v[j] = opt.beta2 * v[j] + (1.0 - opt.beta2) * gj * gj;
      double upd = cfg.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + opt.eps);
      p.data[j] = static_cast<real>(p.data[j] - upd);
      ARIW_CHECK(std::isfinite(p.data[j]),
                 "train: non-finite parameter at step {}", step);
    }
  }

  state_cache[image_idx] = g.val(composed);
  cache_valid[image_idx] = 1;

  std::vector<double> scores(n_att);
  for (size_t i = 0; i < n_att; ++i) scores[i] = -b.per_branch_ce[i];
  std::vector<double> w_now = robust_weights(scores);
  double sum = 0;
  for (size_t i = 0; i < n_att; ++i) {
    model.robust_ema[i] =
        kEmaDecay * model.robust_ema[i] + (1.0 - kEmaDecay) * w_now[i];
    sum += model.robust_ema[i];
  }
  ARIW_CHECK(sum > 0, "train: robustness weights collapsed at step {}", step);
  for (double& w : model.robust_ema) w /= sum;

  step += 1;
  return b;
}

std::string loss_log_header(int n_branches) {
  std::string h = "step,l1,l2,l3,l4,total";
  for (int i = 1; i <= n_branches; ++i) h += fmt::format(",w{}", i);
  h += "\n";
  return h;
}

std::string loss_log_row(int64_t step, const LossBreakdown& b,
                         const std::vector<double>& ema) {
  std::string row = fmt::format("{},{},{},{},{},{}", step, b.l1_mse,
                                b.l2_inv_psnr, b.l3_global_ce,
                                b.l4_local_ce_sum, b.total);
  for (double w : ema) row += fmt::format(",{}", w);
  row += "\n";
  return row;
}

Checkpoint train(const TrainConfig& cfg, const ImageFolder& data,
                 const std::string& loss_log_path, const ProgressFn& progress) {
  cfg.validate();
  ARIW_CHECK(!data.images.empty(), "train: dataset '{}' is empty", data.dir);
  for (const Tensor<real>& img : data.images)
    ARIW_CHECK(img.shape[0] == cfg.image_size && img.shape[1] == cfg.image_size,
               "train: dataset images are {} but config wants {}",
               shape_str(img.shape), cfg.image_size);

  TrainSession session(cfg, data.images.size());
  std::ofstream log;
  if (!loss_log_path.empty()) {
    log.open(loss_log_path, std::ios::trunc);
    ARIW_CHECK(log.good(), "train: cannot open loss log '{}'", loss_log_path);
    log << loss_log_header(static_cast<int>(cfg.attack_suite.specs.size()));
  }
  for (int64_t s = 0; s < cfg.steps; ++s) {
    size_t idx = static_cast<size_t>(s) % data.images.size();
    LossBreakdown b = session.train_step(data.images[idx], idx);
    if (log.is_open()) {
      log << loss_log_row(s, b, session.model.robust_ema);
      log.flush();
    }
    if (progress) progress(s, b);
  }
  Checkpoint ckpt{cfg, std::move(session.model), cfg.steps, {}};
  ckpt.rng_state.emplace_back("train.bits", session.bits_rng.counter());
  ckpt.rng_state.emplace_back("train.init", session.init_rng.counter());
  const auto& specs = cfg.attack_suite.specs;
  for (size_t i = 0; i < specs.size(); ++i)
    ckpt.rng_state.emplace_back(
        fmt::format("train.attack.{}.{}", i, specs[i].name()),
        session.attack_rngs[i].counter());
  return ckpt;
}

}  // namespace ariw

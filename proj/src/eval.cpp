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

#include "ariw/eval.hpp"

#include <fmt/format.h>

#include <sstream>

#include "ariw/attacks.hpp"
#include "ariw/decoder.hpp"
#include "ariw/encoder.hpp"
#include "ariw/losses.hpp"

namespace ariw {

namespace {

constexpr const char* kHeader = "dataset,alpha,attack,param,psnr,ssim,acc_percent,n";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

std::string EvalReport::to_csv() const {
  std::string out = std::string(kHeader) + "\n";
  for (const EvalRow& r : rows)
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.dataset, r.alpha,
                       r.attack, r.param, r.psnr, r.ssim, r.acc_percent, r.n);
  return out;
}

EvalReport EvalReport::from_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  ARIW_CHECK(std::getline(ss, line), "eval report: empty text");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ARIW_CHECK(line == kHeader, "eval report: unexpected header '{}'", line);
  EvalReport rep;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    ARIW_CHECK(f.size() == 8, "eval report: row has {} fields: '{}'", f.size(),
               line);
    EvalRow r;
    r.dataset = f[0];
    try {
      r.alpha = std::stod(f[1]);
      r.attack = f[2];
      r.param = std::stod(f[3]);
      r.psnr = std::stod(f[4]);
      r.ssim = std::stod(f[5]);
      r.acc_percent = std::stod(f[6]);
      r.n = std::stoi(f[7]);
    } catch (const std::exception&) {
      fail("eval report: bad numeric field in '{}'", line);
    }
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

EvalReport run_eval(Checkpoint& ckpt, const ImageFolder& data,
                    const std::vector<double>& alphas, uint64_t seed) {
  ARIW_CHECK(!alphas.empty(), "eval: no alphas given");
  ARIW_CHECK(!data.images.empty(), "eval: dataset '{}' is empty", data.dir);
  const ModelConfig& cfg = ckpt.model.cfg;
  for (const Tensor<real>& img : data.images)
    ARIW_CHECK(img.shape[0] == cfg.image_size && img.shape[1] == cfg.image_size,
               "eval: dataset images are {} but model wants {}",
               shape_str(img.shape), cfg.image_size);
  const std::vector<AttackSpec>& specs = ckpt.train_config.attack_suite.specs;
  const int n_img = static_cast<int>(data.images.size());

  EvalReport rep;
  for (size_t ai = 0; ai < alphas.size(); ++ai) {
    const double alpha = alphas[ai];
    ARIW_CHECK(alpha >= 0, "eval: alpha {} must be >= 0", alpha);
    double psnr_sum = 0, ssim_sum = 0;
    std::vector<double> acc_sum(specs.size(), 0.0);
    for (int ii = 0; ii < n_img; ++ii) {
      const Tensor<real>& cover = data.images[static_cast<size_t>(ii)];
      RngStream bits_rng(seed, fmt::format("eval.bits.{}.{}", ai, ii));
      RngStream init_rng(seed, fmt::format("eval.init.{}.{}", ai, ii));
      WatermarkBits bits = random_bits(cfg.L, bits_rng);
      Tensor<real> init =
          init_state(ckpt.train_config.init_kind, cover, init_rng);
      EmbedResult<real> emb =
          embed(cover, bits, ckpt.model, alpha, cfg.infer_iters, init);
      psnr_sum += psnr(cover, emb.image);
      ssim_sum += ssim(cover, emb.image);
      for (size_t si = 0; si < specs.size(); ++si) {
        AttackSpec spec = specs[si];
        spec.differentiable = false;
        RngStream att_rng(seed,
                          fmt::format("eval.att.{}.{}.{}", ai, ii, si));
        Tensor<real> attacked = apply_attack(emb.image, cover, spec, att_rng);
        ExtractResult<real> ex = extract(attacked, ckpt.model);
        acc_sum[si] += bit_accuracy(ex.hard, bits);
      }
    }
    double id_acc = -1;
    for (size_t si = 0; si < specs.size(); ++si)
      if (specs[si].kind == AttackSpec::Kind::kIdentity)
        id_acc = acc_sum[si] / n_img;
    for (size_t si = 0; si < specs.size(); ++si) {
      EvalRow r;
      r.dataset = data.name();
      r.alpha = alpha;
      r.attack = specs[si].name();
      r.param = specs[si].param;
      r.psnr = psnr_sum / n_img;
      r.ssim = ssim_sum / n_img;
      r.acc_percent = 100.0 * acc_sum[si] / n_img;
      r.n = n_img;
      if (id_acc >= 0 && acc_sum[si] / n_img > id_acc + 1e-9)
        fmt::print(stderr,
                   "warning: {} beats identity accuracy at alpha={} "
                   "({:.2f}% vs {:.2f}%)\n",
                   r.attack, alpha, r.acc_percent, 100.0 * id_acc);
      rep.rows.push_back(std::move(r));
    }
  }
  return rep;
}

}  // namespace ariw

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

#ifndef ARIW_LOSSES_HPP_
#define ARIW_LOSSES_HPP_

#include <cmath>
#include <vector>

#include "ariw/tensor.hpp"
#include "ariw/wm_codec.hpp"

namespace ariw {

inline constexpr double kBceEps = 1e-7;

// PSNR on the [0,255] scale with a 100 dB cap at vanishing MSE.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
  ARIW_CHECK(a.same_shape(b), "psnr: shape {} vs {}", shape_str(a.shape),
             shape_str(b.shape));
  double se = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    double d = (static_cast<double>(a[i]) - static_cast<double>(b[i])) * 255.0;
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.numel());
  const double peak = 255.0 * 255.0;
  if (mse < peak * 1e-10) return 100.0;
  return 10.0 * std::log10(peak / mse);
}

// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5), channels averaged,
// on the [0,255] scale.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
  ARIW_CHECK(a.same_shape(b), "ssim: shape {} vs {}", shape_str(a.shape),
             shape_str(b.shape));
  ARIW_CHECK(a.rank() == 3, "ssim: input must be HxWxC");
  const int h = a.shape[0], w = a.shape[1], c = a.shape[2], win = 11;
  ARIW_CHECK(h >= win && w >= win, "ssim: image {}x{} smaller than the window",
             h, w);
  static const std::vector<double> kWin = [] {
    std::vector<double> k(11);
    double s = 0;
    for (int i = 0; i < 11; ++i) {
      k[static_cast<size_t>(i)] = std::exp(-((i - 5) * (i - 5)) / (2.0 * 1.5 * 1.5));
      s += k[static_cast<size_t>(i)];
    }
    for (double& v : k) v /= s;
    return k;
  }();
  const double c1 = (0.01 * 255) * (0.01 * 255);
  const double c2 = (0.03 * 255) * (0.03 * 255);
  const int oh = h - win + 1, ow = w - win + 1;
  double total = 0;
  // Separable pass: horizontal then vertical, per channel, for the five
  // filtered moment maps.
  std::vector<double> rowbuf(static_cast<size_t>(h) * ow * 5);
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < ow; ++j) {
        double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
        for (int t = 0; t < win; ++t) {
          double va = static_cast<double>(a.at(i, j + t, ch)) * 255.0;
          double vb = static_cast<double>(b.at(i, j + t, ch)) * 255.0;
          double kv = kWin[static_cast<size_t>(t)];
          ma += kv * va;
          mb += kv * vb;
          maa += kv * va * va;
          mbb += kv * vb * vb;
          mab += kv * va * vb;
        }
        double* r = &rowbuf[(static_cast<size_t>(i) * ow + j) * 5];
        r[0] = ma;
        r[1] = mb;
        r[2] = maa;
        r[3] = mbb;
        r[4] = mab;
      }
    double chsum = 0;
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) {
        double m[5] = {0, 0, 0, 0, 0};
        for (int t = 0; t < win; ++t) {
          const double* r = &rowbuf[(static_cast<size_t>(i + t) * ow + j) * 5];
          double kv = kWin[static_cast<size_t>(t)];
          for (int q = 0; q < 5; ++q) m[q] += kv * r[q];
        }
        double mu_a = m[0], mu_b = m[1];
        double var_a = m[2] - mu_a * mu_a;
        double var_b = m[3] - mu_b * mu_b;
        double cov = m[4] - mu_a * mu_b;
        double num = (2 * mu_a * mu_b + c1) * (2 * cov + c2);
        double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
        chsum += num / den;
      }
    total += chsum / (static_cast<double>(oh) * ow);
  }
  return total / c;
}

inline double bit_accuracy(const WatermarkBits& pred,
                           const WatermarkBits& truth) {
  ARIW_CHECK(pred.size() == truth.size(), "bit_accuracy: {} vs {} bits",
             pred.size(), truth.size());
  ARIW_CHECK(!pred.empty(), "bit_accuracy: empty payload");
  int64_t match = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++match;
  return static_cast<double>(match) / static_cast<double>(pred.size());
}

inline double bce(const std::vector<double>& soft, const WatermarkBits& truth) {
  ARIW_CHECK(soft.size() == truth.size(), "bce: {} soft vs {} truth",
             soft.size(), truth.size());
  double s = 0;
  for (size_t i = 0; i < soft.size(); ++i) {
    double p = std::min(1.0 - kBceEps, std::max(kBceEps, soft[i]));
    double t = truth[i];
    s += -(t * std::log(p) + (1 - t) * std::log(1 - p));
  }
  return s / static_cast<double>(soft.size());
}

struct LossWeights {
  double l1 = 1.5, l2 = 1.0, l3 = 1.0, l4 = 1.0;
};

struct LossBreakdown {
  double l1_mse = 0;
  double l2_inv_psnr = 0;
  double l3_global_ce = 0;
  double l4_local_ce_sum = 0;
  std::vector<double> per_branch_ce;
  double total = 0;
};

template <typename T>
LossBreakdown compute_losses(const Tensor<T>& cover, const Tensor<T>& wm_img,
                             const std::vector<double>& soft_global,
                             const std::vector<std::vector<double>>& branches,
                             const WatermarkBits& truth,
                             const LossWeights& lw) {
  ARIW_CHECK(cover.same_shape(wm_img), "losses: cover/wm shape mismatch");
  LossBreakdown out;
  double se = 0;
  for (int64_t i = 0; i < cover.numel(); ++i) {
    double d = static_cast<double>(wm_img[i]) - static_cast<double>(cover[i]);
    se += d * d;
  }
  out.l1_mse = se / static_cast<double>(cover.numel());
  out.l2_inv_psnr = 1.0 / psnr(cover, wm_img);
  out.l3_global_ce = bce(soft_global, truth);
  for (const std::vector<double>& s : branches)
    out.per_branch_ce.push_back(bce(s, truth));
  out.l4_local_ce_sum = 0;
  for (double v : out.per_branch_ce) out.l4_local_ce_sum += v;
  out.total = lw.l1 * out.l1_mse + lw.l2 * out.l2_inv_psnr +
              lw.l3 * out.l3_global_ce + lw.l4 * out.l4_local_ce_sum;
  return out;
}

}  // namespace ariw

#endif  // ARIW_LOSSES_HPP_

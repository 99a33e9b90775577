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

#ifndef ARIW_EVAL_HPP_
#define ARIW_EVAL_HPP_

#include <string>
#include <vector>

#include "ariw/checkpoint.hpp"
#include "ariw/dataset.hpp"

namespace ariw {

struct EvalRow {
  std::string dataset;
  double alpha = 0;
  std::string attack;
  double param = 0;
  double psnr = 0;
  double ssim = 0;
  double acc_percent = 0;
  int n = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::string to_csv() const;
  static EvalReport from_csv(const std::string& text);
};

// Embeds a fresh random payload into every image at every alpha, applies the
// checkpoint's attack suite in its faithful flavor, and averages PSNR/SSIM of
// the embedding plus decoded bit accuracy per (alpha, attack) pair. Row order:
// alphas as given, attacks in suite order.
EvalReport run_eval(Checkpoint& ckpt, const ImageFolder& data,
                    const std::vector<double>& alphas, uint64_t seed);

}  // namespace ariw

#endif  // ARIW_EVAL_HPP_

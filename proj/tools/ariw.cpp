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

#include <fmt/format.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ariw/attacks.hpp"
#include "ariw/checkpoint.hpp"
#include "ariw/dataset.hpp"
#include "ariw/decoder.hpp"
#include "ariw/encoder.hpp"
#include "ariw/eval.hpp"
#include "ariw/io.hpp"
#include "ariw/losses.hpp"
#include "ariw/trainer.hpp"

namespace {

using namespace ariw;

Tensor<real> read_sized(const std::string& path, int size) {
  Tensor<real> img = read_image(path);
  if (img.shape[0] != size || img.shape[1] != size)
    img = resize_image(img, size, size);
  clamp01(img);
  return img;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_path) {
  TrainConfig cfg = TrainConfig::parse_file(config_path);
  ImageFolder data = ingest(data_dir, cfg.image_size);
  fmt::print(stderr, "training on {} images from {}\n", data.images.size(),
             data_dir);
  Checkpoint ckpt =
      train(cfg, data, out_path + ".loss.csv",
            [&](int64_t step, const LossBreakdown& b) {
              if ((step + 1) % 25 == 0 || step + 1 == cfg.steps)
                fmt::print(stderr, "step {}/{} total={:.5f} l1={:.6f} l3={:.4f} l4={:.4f}\n",
                           step + 1, cfg.steps, b.total, b.l1_mse,
                           b.l3_global_ce, b.l4_local_ce_sum);
            });
  save_checkpoint(ckpt, out_path);
  fmt::print(stderr, "wrote {} and {}.loss.csv\n", out_path, out_path);
  return 0;
}

int cmd_embed(const std::string& model_path, const std::string& image_path,
              const std::string& bits_hex, double alpha,
              const std::string& out_path) {
  Checkpoint ckpt = load_checkpoint(model_path);
  const ModelConfig& cfg = ckpt.model.cfg;
  Tensor<real> cover = read_sized(image_path, cfg.image_size);
  WatermarkBits bits = hex_to_bits(bits_hex, cfg.L);
  RngStream init_rng(0, "embed.init");
  Tensor<real> init =
      init_state(ckpt.train_config.init_kind, cover, init_rng);
  EmbedResult<real> emb =
      embed(cover, bits, ckpt.model, alpha, cfg.infer_iters, init);
  write_png(out_path, emb.image);
  fmt::print(stderr, "embedded {} bits at alpha={} psnr={:.2f} dB -> {}\n",
             cfg.L, alpha, psnr(cover, emb.image), out_path);
  return 0;
}

int cmd_extract(const std::string& model_path, const std::string& image_path) {
  Checkpoint ckpt = load_checkpoint(model_path);
  Tensor<real> img = read_sized(image_path, ckpt.model.cfg.image_size);
  ExtractResult<real> ex = extract(img, ckpt.model);
  fmt::print("{}\n", bits_to_hex(ex.hard));
  std::string soft;
  for (size_t i = 0; i < ex.soft.size(); ++i)
    soft += fmt::format("{}{:.6f}", i ? " " : "", ex.soft[i]);
  fmt::print("{}\n", soft);
  return 0;
}

int cmd_attack(const std::string& kind, double param, uint64_t seed,
               const std::string& in_path, const std::string& cover_path,
               const std::string& out_path) {
  AttackSpec spec;
  spec.kind = AttackSpec::kind_from_name(kind);
  spec.param = param;
  spec.differentiable = false;
  spec.validate();
  Tensor<real> img = read_image(in_path);
  Tensor<real> cover;
  if (spec.needs_cover()) {
    ARIW_CHECK(!cover_path.empty(), "attack {} needs --cover", spec.name());
    cover = read_image(cover_path);
    ARIW_CHECK(cover.same_shape(img), "attack: cover {} vs image {}",
               shape_str(cover.shape), shape_str(img.shape));
  } else {
    cover = img;
  }
  RngStream rng(seed, "attack.cli");
  write_png(out_path, apply_attack(img, cover, spec, rng));
  fmt::print(stderr, "{} -> {}\n", spec.name(), out_path);
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_dir,
             const std::vector<double>& alphas, const std::string& report_path) {
  Checkpoint ckpt = load_checkpoint(model_path);
  ImageFolder data = ingest(data_dir, ckpt.model.cfg.image_size);
  EvalReport rep = run_eval(ckpt, data, alphas, 0);
  std::ofstream out(report_path, std::ios::trunc);
  ARIW_CHECK(out.good(), "eval: cannot open report '{}'", report_path);
  out << rep.to_csv();
  out.flush();
  ARIW_CHECK(out.good(), "eval: write to '{}' failed", report_path);
  fmt::print(stderr, "wrote {} rows to {}\n", rep.rows.size(), report_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ariw: attack-robust invisible watermarking"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, model_path, image_path;
  std::string bits_hex, kind, in_path, cover_path, report_path;
  double alpha = 1.0, param = 0.0;
  uint64_t seed = 0;
  std::vector<double> alphas;

  CLI::App* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config_path)->required();
  train->add_option("--data", data_dir)->required();
  train->add_option("--out", out_path)->required();

  CLI::App* embed = app.add_subcommand("embed", "embed a payload");
  embed->add_option("--model", model_path)->required();
  embed->add_option("--image", image_path)->required();
  embed->add_option("--bits", bits_hex)->required();
  embed->add_option("--alpha", alpha)->required();
  embed->add_option("--out", out_path)->required();

  CLI::App* extract = app.add_subcommand("extract", "recover a payload");
  extract->add_option("--model", model_path)->required();
  extract->add_option("--image", image_path)->required();

  CLI::App* attack = app.add_subcommand("attack", "distort an image");
  attack->add_option("--kind", kind)->required();
  attack->add_option("--param", param)->required();
  attack->add_option("--seed", seed)->required();
  attack->add_option("--in", in_path)->required();
  attack->add_option("--cover", cover_path);
  attack->add_option("--out", out_path)->required();

  CLI::App* eval = app.add_subcommand("eval", "grid evaluation report");
  eval->add_option("--model", model_path)->required();
  eval->add_option("--data", data_dir)->required();
  eval->add_option("--alphas", alphas)->required()->delimiter(',');
  eval->add_option("--report", report_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, data_dir, out_path);
    if (embed->parsed())
      return cmd_embed(model_path, image_path, bits_hex, alpha, out_path);
    if (extract->parsed()) return cmd_extract(model_path, image_path);
    if (attack->parsed())
      return cmd_attack(kind, param, seed, in_path, cover_path, out_path);
    if (eval->parsed())
      return cmd_eval(model_path, data_dir, alphas, report_path);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}

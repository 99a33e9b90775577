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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>

#include "ariw/attacks.hpp"
#include "ariw/checkpoint.hpp"
#include "ariw/dataset.hpp"
#include "ariw/decoder.hpp"
#include "ariw/encoder.hpp"
#include "ariw/eval.hpp"
#include "ariw/io.hpp"
#include "ariw/losses.hpp"
#include "ariw/trainer.hpp"

namespace py = pybind11;

namespace {

using namespace ariw;

Tensor<real> read_sized(const std::string& path, int size) {
  Tensor<real> img = read_image(path);
  if (img.shape[0] != size || img.shape[1] != size)
    img = resize_image(img, size, size);
  clamp01(img);
  return img;
}

int64_t py_train(const std::string& config_text, const std::string& data_dir,
                 const std::string& out_ckpt, const std::string& loss_log) {
  TrainConfig cfg = TrainConfig::parse(config_text);
  ImageFolder data = ingest(data_dir, cfg.image_size);
  Checkpoint ckpt = train(cfg, data, loss_log);
  save_checkpoint(ckpt, out_ckpt);
  return ckpt.step;
}

double py_embed(const std::string& model_path, const std::string& image_path,
                const std::string& bits_hex, double alpha,
                const std::string& out_png) {
  Checkpoint ckpt = load_checkpoint(model_path);
  const ModelConfig& cfg = ckpt.model.cfg;
  Tensor<real> cover = read_sized(image_path, cfg.image_size);
  WatermarkBits bits = hex_to_bits(bits_hex, cfg.L);
  RngStream init_rng(0, "embed.init");
  Tensor<real> init = init_state(ckpt.train_config.init_kind, cover, init_rng);
  EmbedResult<real> emb =
      embed(cover, bits, ckpt.model, alpha, cfg.infer_iters, init);
  write_png(out_png, emb.image);
  return psnr(cover, emb.image);
}

py::tuple py_extract(const std::string& model_path,
                     const std::string& image_path) {
  Checkpoint ckpt = load_checkpoint(model_path);
  Tensor<real> img = read_sized(image_path, ckpt.model.cfg.image_size);
  ExtractResult<real> ex = extract(img, ckpt.model);
  return py::make_tuple(bits_to_hex(ex.hard), ex.soft);
}

void py_attack(const std::string& kind, double param, uint64_t seed,
               const std::string& in_path, const std::string& cover_path,
               const std::string& out_path) {
  AttackSpec spec;
  spec.kind = AttackSpec::kind_from_name(kind);
  spec.param = param;
  spec.differentiable = false;
  spec.validate();
  Tensor<real> img = read_image(in_path);
  Tensor<real> cover = img;
  if (spec.needs_cover()) {
    ARIW_CHECK(!cover_path.empty(), "attack {} needs a cover image",
               spec.name());
    cover = read_image(cover_path);
    ARIW_CHECK(cover.same_shape(img), "attack: cover/image shape mismatch");
  }
  RngStream rng(seed, "attack.cli");
  write_png(out_path, apply_attack(img, cover, spec, rng));
}

size_t py_eval(const std::string& model_path, const std::string& data_dir,
               const std::vector<double>& alphas,
               const std::string& report_path) {
  Checkpoint ckpt = load_checkpoint(model_path);
  ImageFolder data = ingest(data_dir, ckpt.model.cfg.image_size);
  EvalReport rep = run_eval(ckpt, data, alphas, 0);
  std::ofstream out(report_path, std::ios::trunc);
  ARIW_CHECK(out.good(), "eval: cannot open report '{}'", report_path);
  out << rep.to_csv();
  return rep.rows.size();
}

double py_psnr(const std::string& a, const std::string& b) {
  return psnr(read_image(a), read_image(b));
}

double py_ssim(const std::string& a, const std::string& b) {
  return ssim(read_image(a), read_image(b));
}

std::string py_canonical_config(const std::string& text) {
  return TrainConfig::parse(text).serialize();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "blind watermark embedding, extraction and attack simulation";
  py::register_exception<ariw::Error>(m, "AriwError");
  m.def("train", &py_train, py::arg("config_text"), py::arg("data_dir"),
        py::arg("out_ckpt"), py::arg("loss_log") = std::string());
  m.def("embed", &py_embed, py::arg("model"), py::arg("image"),
        py::arg("bits_hex"), py::arg("alpha"), py::arg("out_png"));
  m.def("extract", &py_extract, py::arg("model"), py::arg("image"));
  m.def("attack", &py_attack, py::arg("kind"), py::arg("param"),
        py::arg("seed"), py::arg("in_path"), py::arg("cover_path") = std::string(),
        py::arg("out_path") = std::string());
  m.def("eval", &py_eval, py::arg("model"), py::arg("data_dir"),
        py::arg("alphas"), py::arg("report_path"));
  m.def("psnr", &py_psnr, py::arg("a"), py::arg("b"));
  m.def("ssim", &py_ssim, py::arg("a"), py::arg("b"));
  m.def("canonical_config", &py_canonical_config, py::arg("text"));
  m.def("bits_to_hex", &ariw::bits_to_hex, py::arg("bits"));
  m.def("hex_to_bits", &ariw::hex_to_bits, py::arg("hex"), py::arg("length"));
}

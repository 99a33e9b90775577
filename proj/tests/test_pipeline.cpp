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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <string>
#include <vector>

#include "ariw/checkpoint.hpp"
#include "ariw/config.hpp"
#include "ariw/dataset.hpp"
#include "ariw/eval.hpp"
#include "ariw/io.hpp"
#include "ariw/trainer.hpp"
#include "doctest.h"
#include "support.hpp"

namespace fs = std::filesystem;
using ariw::AttackSuite;
using ariw::Checkpoint;
using ariw::ImageFolder;
using ariw::Tensor;
using ariw::TrainConfig;
using ariw::real;
namespace testsup = ariw::testsup;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TrainConfig tiny_config(int steps, const std::string& suite = "identity") {
  TrainConfig cfg;
  cfg.image_size = 16;
  cfg.L = 12;
  cfg.steps = steps;
  cfg.attack_suite = AttackSuite::parse(suite);
  cfg.seed = 123;
  return cfg;
}

ImageFolder tiny_folder(int n_images) {
  ImageFolder folder;
  folder.dir = "mem";
  folder.target = 16;
  for (int i = 0; i < n_images; ++i) {
    folder.files.push_back(fmt::format("img{}.png", i));
    folder.images.push_back(testsup::synth_image(16, 16, 100 + i).cast<real>());
  }
  return folder;
}

std::vector<real> flatten_params(ariw::ModelParams<real>& m) {
  std::vector<real> all;
  m.visit([&](const std::string&, Tensor<real>& t) {
    all.insert(all.end(), t.data.begin(), t.data.end());
  });
  return all;
}

}  // namespace

TEST_CASE("train config serializes and parses losslessly") {
  TrainConfig cfg;
  cfg.lr = 2.5e-4;
  cfg.steps = 77;
  cfg.image_size = 32;
  cfg.L = 9;
  cfg.alpha_train = 0.75;
  cfg.init_kind = "gaussian";
  cfg.grad.mode = ariw::GradMode::Kind::kSobel;
  cfg.attack_suite = AttackSuite::parse("identity, jpeg:50, scale:0.5");
  cfg.loss_weights = {2.0, 0.5, 1.0, 0.25};
  cfg.seed = 9001;
  cfg.kernel_size = 5;

  std::string text = cfg.serialize();
  TrainConfig back = TrainConfig::parse(text);
  CHECK(back.lr == cfg.lr);
  CHECK(back.steps == cfg.steps);
  CHECK(back.image_size == cfg.image_size);
  CHECK(back.L == cfg.L);
  CHECK(back.alpha_train == cfg.alpha_train);
  CHECK(back.init_kind == cfg.init_kind);
  CHECK(back.grad.mode == cfg.grad.mode);
  CHECK(back.grad.enabled == cfg.grad.enabled);
  CHECK(back.attack_suite.serialize() == cfg.attack_suite.serialize());
  CHECK(back.loss_weights.l1 == 2.0);
  CHECK(back.loss_weights.l4 == 0.25);
  CHECK(back.seed == cfg.seed);
  CHECK(back.kernel_size == cfg.kernel_size);
  CHECK(back.serialize() == text);

  // Comments, blank lines and whitespace are tolerated.
  TrainConfig sparse = TrainConfig::parse(
      "# a comment\n\n  lr = 0.001 \nsteps=5\n# trailing\n");
  CHECK(sparse.lr == 0.001);
  CHECK(sparse.steps == 5);

  CHECK_THROWS_WITH_AS(TrainConfig::parse("bogus_key = 1\n"),
                       doctest::Contains("line 1"), ariw::Error);
  CHECK_THROWS_AS(TrainConfig::parse("lr\n"), ariw::Error);
  CHECK_THROWS_AS(TrainConfig::parse("lr = abc\n"), ariw::Error);
  CHECK_THROWS_AS(TrainConfig::parse("loss_weights = 1,2,3\n"), ariw::Error);

  TrainConfig bad = tiny_config(1);
  bad.lr = 0;
  CHECK_THROWS_AS(bad.validate(), ariw::Error);
  bad = tiny_config(1);
  bad.batch = 2;
  CHECK_THROWS_AS(bad.validate(), ariw::Error);
  bad = tiny_config(1);
  bad.L = 13;  // 16px payload grid holds 12 slots
  CHECK_THROWS_AS(bad.validate(), ariw::Error);
}

TEST_CASE("checkpoints survive a save/load/save round trip byte for byte") {
  fs::path dir = testsup::fresh_dir("ckpt");
  std::string p1 = (dir / "a.ariw").string();
  std::string p2 = (dir / "b.ariw").string();

  TrainConfig cfg = tiny_config(3, "identity, jpeg:50");
  Checkpoint ckpt;
  ckpt.train_config = cfg;
  ckpt.model = ariw::ModelParams<real>::init(cfg.model_config(), cfg.seed);
  ckpt.model.robust_ema = {0.6, 0.4};
  ckpt.step = 3;
  ckpt.rng_state = {{"train.bits", 42}, {"train.init", 7}};

  ariw::save_checkpoint(ckpt, p1);
  Checkpoint back = ariw::load_checkpoint(p1);
  CHECK(back.step == 3);
  CHECK(back.train_config.serialize() == cfg.serialize());
  CHECK(back.model.robust_ema == std::vector<double>{0.6, 0.4});
  REQUIRE(back.rng_state.size() == 2);
  CHECK(back.rng_state[0].first == "train.bits");
  CHECK(back.rng_state[0].second == 42);

  std::vector<real> before = flatten_params(ckpt.model);
  std::vector<real> after = flatten_params(back.model);
  REQUIRE(before.size() == after.size());
  CHECK(before == after);

  ariw::save_checkpoint(back, p2);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("checkpoint loader rejects corrupted files") {
  fs::path dir = testsup::fresh_dir("ckpt_bad");
  std::string good = (dir / "good.ariw").string();

  TrainConfig cfg = tiny_config(1);
  Checkpoint ckpt;
  ckpt.train_config = cfg;
  ckpt.model = ariw::ModelParams<real>::init(cfg.model_config(), 1);
  ariw::save_checkpoint(ckpt, good);
  std::string bytes = slurp(good);

  auto write_bytes = [&](const std::string& name, const std::string& content) {
    std::string p = (dir / name).string();
    std::ofstream out(p, std::ios::binary);
    out << content;
    out.close();
    return p;
  };

  CHECK_THROWS_AS(ariw::load_checkpoint((dir / "missing.ariw").string()),
                  ariw::Error);

  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(ariw::load_checkpoint(write_bytes("magic.ariw", magic)),
                  ariw::Error);

  CHECK_THROWS_AS(ariw::load_checkpoint(write_bytes(
                      "trunc.ariw", bytes.substr(0, bytes.size() / 2))),
                  ariw::Error);

  CHECK_THROWS_AS(ariw::load_checkpoint(write_bytes(
                      "trail.ariw", bytes + std::string(4, '\0'))),
                  ariw::Error);

  CHECK_THROWS_AS(
      ariw::load_checkpoint(write_bytes("short.ariw", bytes.substr(0, 10))),
      ariw::Error);
}

TEST_CASE("folder ingestion sorts, resizes and validates") {
  fs::path dir = testsup::fresh_dir("dataset");

  ariw::write_png((dir / "b.png").string(),
                  testsup::synth_image(24, 24, 1).cast<real>());
  ariw::write_png((dir / "a.png").string(),
                  testsup::synth_image(40, 24, 2).cast<real>());
  // OpenCV writes .jpg through the same API.
  cv::Mat gray(20, 20, CV_8UC1);
  cv::randu(gray, 0, 255);
  REQUIRE(cv::imwrite((dir / "c.png").string(), gray));
  std::ofstream(dir / "notes.txt") << "not an image";

  ImageFolder folder = ariw::ingest(dir.string(), 16);
  CHECK(folder.name() == dir.filename().string());
  REQUIRE(folder.files == std::vector<std::string>{"a.png", "b.png", "c.png"});
  REQUIRE(folder.images.size() == 3);
  for (const Tensor<real>& img : folder.images) {
    CHECK(img.shape == std::vector<int>{16, 16, 3});
    for (real v : img.data) CHECK((v >= 0.0f && v <= 1.0f));
  }
  // Grayscale promotes to three equal channels.
  const Tensor<real>& g = folder.images[2];
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) {
      CHECK(g.at(i, j, 0) == g.at(i, j, 1));
      CHECK(g.at(i, j, 1) == g.at(i, j, 2));
    }

  fs::path empty = testsup::fresh_dir("dataset_empty");
  CHECK_THROWS_AS(ariw::ingest(empty.string(), 16), ariw::Error);

  std::ofstream(dir / "broken.png") << "definitely not a png";
  CHECK_THROWS_WITH_AS(ariw::ingest(dir.string(), 16),
                       doctest::Contains("broken.png"), ariw::Error);
}

TEST_CASE("training runs, logs and stays reproducible") {
  ImageFolder folder = tiny_folder(2);

  SUBCASE("zero loss weights freeze the parameters") {
    TrainConfig cfg = tiny_config(2);
    cfg.loss_weights = {0, 0, 0, 0};
    ariw::TrainSession session(cfg, folder.images.size());
    std::vector<real> before = flatten_params(session.model);
    session.train_step(folder.images[0], 0);
    session.train_step(folder.images[1], 1);
    CHECK(flatten_params(session.model) == before);
  }

  SUBCASE("a short run produces finite losses and a complete log") {
    fs::path dir = testsup::fresh_dir("trainlog");
    std::string log_path = (dir / "loss.csv").string();
    TrainConfig cfg = tiny_config(5, "identity, jpeg:50");
    int calls = 0;
    Checkpoint ckpt = ariw::train(cfg, folder, log_path,
                                  [&](int64_t, const ariw::LossBreakdown& b) {
                                    ++calls;
                                    CHECK(std::isfinite(b.total));
                                    CHECK(b.l1_mse >= 0);
                                    CHECK(b.l3_global_ce >= 0);
                                    CHECK(b.total ==
                                          doctest::Approx(
                                              1.5 * b.l1_mse + b.l2_inv_psnr +
                                              b.l3_global_ce +
                                              b.l4_local_ce_sum)
                                              .epsilon(1e-6));
                                  });
    CHECK(calls == 5);
    CHECK(ckpt.step == 5);

    // EMA stays a probability vector.
    double sum = 0;
    for (double w : ckpt.model.robust_ema) {
      CHECK(w > 0);
      sum += w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

    // One header plus one row per step; per-branch weight columns.
    std::string log = slurp(log_path);
    std::vector<std::string> lines;
    std::stringstream ss(log);
    std::string line;
    while (std::getline(ss, line))
      if (!line.empty()) lines.push_back(line);
    REQUIRE(lines.size() == 6);
    CHECK(lines[0] == "step,l1,l2,l3,l4,total,w1,w2");
    CHECK(lines[1].substr(0, 2) == "0,");
    CHECK(lines[5].substr(0, 2) == "4,");

    // RNG counters are recorded for every stream.
    REQUIRE(ckpt.rng_state.size() == 4);
    CHECK(ckpt.rng_state[0].first == "train.bits");
    CHECK(ckpt.rng_state[2].first == "train.attack.0.identity");
    CHECK(ckpt.rng_state[3].first == "train.attack.1.jpeg");
    CHECK(ckpt.rng_state[0].second > 0);
  }

  SUBCASE("training moves the decoder as soon as bit losses are active") {
    TrainConfig cfg = tiny_config(1);
    ariw::TrainSession session(cfg, folder.images.size());
    std::vector<real> dense_before(session.model.dense_w.data.begin(),
                                   session.model.dense_w.data.end());
    session.train_step(folder.images[0], 0);
    CHECK(session.model.dense_w.data !=
          std::vector<real>(dense_before.begin(), dense_before.end()));
    CHECK(session.step == 1);
  }

  SUBCASE("same seed, same data, same bytes") {
    fs::path dir = testsup::fresh_dir("determinism");
    TrainConfig cfg = tiny_config(3, "identity, gauss_noise:0.02");
    Checkpoint c1 = ariw::train(cfg, folder, "");
    Checkpoint c2 = ariw::train(cfg, folder, "");
    std::string p1 = (dir / "r1.ariw").string();
    std::string p2 = (dir / "r2.ariw").string();
    ariw::save_checkpoint(c1, p1);
    ariw::save_checkpoint(c2, p2);
    CHECK(slurp(p1) == slurp(p2));

    // A different seed diverges.
    cfg.seed = 321;
    Checkpoint c3 = ariw::train(cfg, folder, "");
    std::string p3 = (dir / "r3.ariw").string();
    ariw::save_checkpoint(c3, p3);
    CHECK(slurp(p1) != slurp(p3));
  }
}

TEST_CASE("evaluation reports one row per alpha and attack") {
  ImageFolder folder = tiny_folder(2);
  TrainConfig cfg = tiny_config(2, "identity, jpeg:50, dropout:0.9");
  Checkpoint ckpt = ariw::train(cfg, folder, "");

  fs::path dir = testsup::fresh_dir("evalrep");
  std::string before_path = (dir / "before.ariw").string();
  ariw::save_checkpoint(ckpt, before_path);

  ariw::EvalReport report = ariw::run_eval(ckpt, folder, {0.5, 1.0}, 0);
  REQUIRE(report.rows.size() == 6);
  for (size_t i = 0; i < report.rows.size(); ++i) {
    const ariw::EvalRow& row = report.rows[i];
    CHECK(row.dataset == folder.name());
    CHECK(row.alpha == (i < 3 ? 0.5 : 1.0));
    CHECK(row.n == 2);
    CHECK(row.psnr > 0);
    CHECK((row.ssim > -1.0 && row.ssim <= 1.0));
    CHECK((row.acc_percent >= 0.0 && row.acc_percent <= 100.0));
  }
  CHECK(report.rows[0].attack == "identity");
  CHECK(report.rows[1].attack == "jpeg");
  CHECK(report.rows[1].param == 50.0);
  CHECK(report.rows[3].attack == "identity");

  // Within one alpha the embedding metrics are shared across attacks.
  CHECK(report.rows[0].psnr == doctest::Approx(report.rows[1].psnr));
  CHECK(report.rows[0].ssim == doctest::Approx(report.rows[2].ssim));

  // Evaluation must not touch the checkpoint.
  std::string after_path = (dir / "after.ariw").string();
  ariw::save_checkpoint(ckpt, after_path);
  CHECK(slurp(before_path) == slurp(after_path));

  // Determinism and CSV round trip.
  ariw::EvalReport again = ariw::run_eval(ckpt, folder, {0.5, 1.0}, 0);
  CHECK(again.to_csv() == report.to_csv());

  std::string csv = report.to_csv();
  CHECK(csv.substr(0, csv.find('\n')) ==
        "dataset,alpha,attack,param,psnr,ssim,acc_percent,n");
  ariw::EvalReport back = ariw::EvalReport::from_csv(csv);
  CHECK(back.to_csv() == csv);

  CHECK_THROWS_AS(ariw::EvalReport::from_csv("not,a,report\n"), ariw::Error);
  CHECK_THROWS_AS(ariw::EvalReport::from_csv(""), ariw::Error);
}

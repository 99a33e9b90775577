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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "ariw/eval.hpp"
#include "ariw/io.hpp"
#include "doctest.h"
#include "support.hpp"

namespace fs = std::filesystem;
namespace testsup = ariw::testsup;

namespace {

int run(const std::string& cmd) {
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("command line binary runs the full workflow end to end") {
  const char* cli = std::getenv("ARIW_CLI");
  if (!cli) {
    MESSAGE("ARIW_CLI not set; skipping the end-to-end exercise");
    return;
  }
  const std::string bin = cli;
  fs::path dir = testsup::fresh_dir("cli");
  fs::path data = dir / "data";
  fs::create_directories(data);
  for (int i = 0; i < 3; ++i)
    ariw::write_png((data / fmt::format("im{}.png", i)).string(),
                    testsup::synth_image(24, 24, 50 + i).cast<ariw::real>());

  std::ofstream(dir / "train.cfg")
      << "image_size = 16\nL = 12\nsteps = 3\nseed = 7\n"
      << "attack_suite = identity, jpeg:50\n";

  fs::path model = dir / "model.ariw";
  fs::path quiet = dir / "stderr.txt";

  SUBCASE("train, embed, extract, attack, eval") {
    REQUIRE(run(fmt::format("{} train --config {} --data {} --out {} 2>{}",
                            bin, (dir / "train.cfg").string(), data.string(),
                            model.string(), quiet.string())) == 0);
    CHECK(fs::exists(model));
    CHECK(fs::exists(dir / "model.ariw.loss.csv"));

    fs::path wm = dir / "wm.png";
    REQUIRE(run(fmt::format(
                "{} embed --model {} --image {} --bits a5f --alpha 1.0 "
                "--out {} 2>{}",
                bin, model.string(), (data / "im0.png").string(), wm.string(),
                quiet.string())) == 0);
    CHECK(fs::exists(wm));

    fs::path extracted = dir / "extract.txt";
    REQUIRE(run(fmt::format("{} extract --model {} --image {} >{} 2>{}", bin,
                            model.string(), wm.string(), extracted.string(),
                            quiet.string())) == 0);
    std::string out = slurp(extracted);
    // First line: 3 hex digits for 12 bits. Second line: 12 soft scores.
    size_t eol = out.find('\n');
    REQUIRE(eol == 3);
    for (char c : out.substr(0, 3)) CHECK(std::isxdigit(static_cast<unsigned char>(c)));
    int fields = 0;
    std::stringstream soft(out.substr(eol + 1));
    for (std::string tok; soft >> tok;) {
      ++fields;
      double v = std::stod(tok);
      CHECK((v >= 0.0 && v <= 1.0));
    }
    CHECK(fields == 12);

    fs::path attacked = dir / "attacked.png";
    REQUIRE(run(fmt::format(
                "{} attack --kind jpeg --param 50 --seed 3 --in {} --out {} "
                "2>{}",
                bin, wm.string(), attacked.string(), quiet.string())) == 0);
    CHECK(fs::exists(attacked));

    // Dropout needs the cover; without it the tool must fail cleanly.
    fs::path dropped = dir / "dropped.png";
    CHECK(run(fmt::format(
              "{} attack --kind dropout --param 0.9 --seed 3 --in {} --out {} "
              "2>{}",
              bin, wm.string(), dropped.string(), quiet.string())) != 0);
    fs::path cover16 = dir / "cover16.png";
    ariw::write_png(cover16.string(),
                    testsup::synth_image(16, 16, 60).cast<ariw::real>());
    REQUIRE(run(fmt::format(
                "{} attack --kind dropout --param 0.9 --seed 3 --in {} "
                "--cover {} --out {} 2>{}",
                bin, wm.string(), cover16.string(), dropped.string(),
                quiet.string())) == 0);
    CHECK(fs::exists(dropped));

    fs::path report = dir / "report.csv";
    REQUIRE(run(fmt::format(
                "{} eval --model {} --data {} --alphas 0.5,1.0 --report {} "
                "2>{}",
                bin, model.string(), data.string(), report.string(),
                quiet.string())) == 0);
    ariw::EvalReport rep = ariw::EvalReport::from_csv(slurp(report));
    CHECK(rep.rows.size() == 4);  // 2 alphas x 2 attacks
    CHECK(rep.rows[0].attack == "identity");
    CHECK(rep.rows[0].n == 3);
  }

  SUBCASE("bad invocations exit nonzero with a diagnostic") {
    CHECK(run(fmt::format("{} bogus 2>{}", bin, quiet.string())) != 0);
    CHECK(run(fmt::format("{} embed --model missing.ariw 2>{}", bin,
                          quiet.string())) != 0);
    CHECK(run(fmt::format("{} extract --model {} --image {} 2>{}", bin,
                          (dir / "nope.ariw").string(),
                          (dir / "nope.png").string(), quiet.string())) != 0);
    std::string err = slurp(quiet);
    CHECK(err.find("error:") != std::string::npos);
  }
}

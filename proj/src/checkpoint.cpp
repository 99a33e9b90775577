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

#include "ariw/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"

namespace ariw {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");
static_assert(sizeof(real) == 4, "checkpoint payload is float32");

namespace {

constexpr char kMagic[8] = {'A', 'R', 'I', 'W', 'C', 'K', 'P', '1'};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json header;
  header["config"] = ckpt.train_config.serialize();
  header["step"] = ckpt.step;
  header["robust_ema"] = ckpt.model.robust_ema;
  nlohmann::json rng = nlohmann::json::array();
  for (const auto& [id, counter] : ckpt.rng_state)
    rng.push_back({{"id", id}, {"counter", counter}});
  header["rng"] = std::move(rng);
  nlohmann::json dir = nlohmann::json::array();
  std::vector<const Tensor<real>*> order;
  const_cast<ModelParams<real>&>(ckpt.model)
      .visit([&](const std::string& name, Tensor<real>& t) {
        check_finite(t, name);
        dir.push_back({{"name", name}, {"shape", t.shape}});
        order.push_back(&t);
      });
  header["tensors"] = std::move(dir);
  std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  ARIW_CHECK(out.good(), "checkpoint: cannot open '{}' for writing", path);
  out.write(kMagic, sizeof(kMagic));
  uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const Tensor<real>* t : order)
    out.write(reinterpret_cast<const char*>(t->data.data()),
              static_cast<std::streamsize>(t->data.size() * sizeof(real)));
  out.flush();
  ARIW_CHECK(out.good(), "checkpoint: write to '{}' failed", path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  ARIW_CHECK(in.good(), "checkpoint: cannot open '{}'", path);

  char magic[8];
  in.read(magic, sizeof(magic));
  ARIW_CHECK(in.gcount() == sizeof(magic) &&
                 std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
             "checkpoint: '{}' is not an ARIW checkpoint", path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  ARIW_CHECK(in.good() && hlen > 0 && hlen < (1ull << 24),
             "checkpoint: corrupt header length in '{}'", path);
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  ARIW_CHECK(in.good(), "checkpoint: truncated header in '{}'", path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(htext);
  } catch (const nlohmann::json::exception& e) {
    fail("checkpoint: bad header in '{}': {}", path, e.what());
  }

  Checkpoint ckpt;
  ckpt.train_config = TrainConfig::parse(header.at("config").get<std::string>());
  ckpt.step = header.at("step").get<int64_t>();
  for (const nlohmann::json& e : header.at("rng"))
    ckpt.rng_state.emplace_back(e.at("id").get<std::string>(),
                                e.at("counter").get<uint64_t>());
  ckpt.model = ModelParams<real>::init(ckpt.train_config.model_config(), 0);

  std::vector<double> ema = header.at("robust_ema").get<std::vector<double>>();
  ARIW_CHECK(ema.size() == ckpt.model.robust_ema.size(),
             "checkpoint: robust_ema has {} entries, model expects {}",
             ema.size(), ckpt.model.robust_ema.size());
  ckpt.model.robust_ema = std::move(ema);

  std::map<std::string, Tensor<real>*> by_name;
  ckpt.model.visit([&](const std::string& name, Tensor<real>& t) {
    by_name[name] = &t;
  });
  const nlohmann::json& dir = header.at("tensors");
  ARIW_CHECK(dir.is_array() && dir.size() == by_name.size(),
             "checkpoint: tensor directory has {} entries, model expects {}",
             dir.size(), by_name.size());
  for (const nlohmann::json& e : dir) {
    std::string name = e.at("name").get<std::string>();
    auto it = by_name.find(name);
    ARIW_CHECK(it != by_name.end(), "checkpoint: unexpected tensor '{}'", name);
    Tensor<real>* t = it->second;
    std::vector<int> shape = e.at("shape").get<std::vector<int>>();
    ARIW_CHECK(shape == t->shape, "checkpoint: tensor '{}' has shape {}, model expects {}",
               name, shape_str(shape), shape_str(t->shape));
    in.read(reinterpret_cast<char*>(t->data.data()),
            static_cast<std::streamsize>(t->data.size() * sizeof(real)));
    ARIW_CHECK(in.gcount() ==
                   static_cast<std::streamsize>(t->data.size() * sizeof(real)),
               "checkpoint: truncated payload for '{}' in '{}'", name, path);
    check_finite(*t, name);
    by_name.erase(it);
  }
  ARIW_CHECK(by_name.empty(), "checkpoint: '{}' is missing tensors", path);
  in.peek();
  ARIW_CHECK(in.eof(), "checkpoint: trailing bytes in '{}'", path);
  return ckpt;
}

}  // namespace ariw

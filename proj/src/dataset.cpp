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

#include "ariw/dataset.hpp"

#include <algorithm>
#include <filesystem>

#include "ariw/io.hpp"

namespace ariw {

namespace fs = std::filesystem;

namespace {

bool image_ext(std::string ext) {
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

std::string ImageFolder::name() const {
  fs::path p(dir);
  if (p.filename().empty()) p = p.parent_path();  // trailing slash
  std::string n = p.filename().string();
  return n.empty() ? dir : n;
}

ImageFolder ingest(const std::string& dir, int target) {
  ARIW_CHECK(target >= 1, "ingest: target size must be >= 1");
  ARIW_CHECK(fs::is_directory(dir), "ingest: '{}' is not a directory", dir);
  ImageFolder out;
  out.dir = dir;
  out.target = target;
  for (const fs::directory_entry& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && image_ext(e.path().extension().string()))
      out.files.push_back(e.path().filename().string());
  std::sort(out.files.begin(), out.files.end());
  ARIW_CHECK(!out.files.empty(), "ingest: no PNG/JPEG files in '{}'", dir);
  out.images.reserve(out.files.size());
  for (const std::string& f : out.files) {
    Tensor<real> img = read_image((fs::path(dir) / f).string());
    if (img.shape[0] != target || img.shape[1] != target)
      img = resize_image(img, target, target);
    clamp01(img);
    out.images.push_back(std::move(img));
  }
  return out;
}

}  // namespace ariw

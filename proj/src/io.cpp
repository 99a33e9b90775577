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

#include "ariw/io.hpp"

#include <opencv2/imgcodecs.hpp>

#include <cmath>

namespace ariw {

Tensor<real> read_image(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);  // BGR, gray replicated
  ARIW_CHECK(!m.empty(), "cannot decode image '{}'", path);
  ARIW_CHECK(m.depth() == CV_8U && m.channels() == 3,
             "unsupported pixel format in '{}'", path);
  Tensor<real> out({m.rows, m.cols, 3});
  for (int i = 0; i < m.rows; ++i) {
    const uint8_t* row = m.ptr<uint8_t>(i);
    for (int j = 0; j < m.cols; ++j) {
      out.at(i, j, 0) = static_cast<real>(row[3 * j + 2] / 255.0);
      out.at(i, j, 1) = static_cast<real>(row[3 * j + 1] / 255.0);
      out.at(i, j, 2) = static_cast<real>(row[3 * j + 0] / 255.0);
    }
  }
  return out;
}

void write_png(const std::string& path, const Tensor<real>& img) {
  ARIW_CHECK(img.rank() == 3 && img.shape[2] == 3,
             "write_png: expected HxWx3, got {}", shape_str(img.shape));
  check_finite(img, "write_png");
  cv::Mat m(img.shape[0], img.shape[1], CV_8UC3);
  for (int i = 0; i < m.rows; ++i) {
    uint8_t* row = m.ptr<uint8_t>(i);
    for (int j = 0; j < m.cols; ++j)
      for (int c = 0; c < 3; ++c) {
        double v = std::clamp(static_cast<double>(img.at(i, j, c)), 0.0, 1.0);
        row[3 * j + (2 - c)] = static_cast<uint8_t>(std::lround(v * 255.0));
      }
  }
  ARIW_CHECK(cv::imwrite(path, m), "cannot write '{}'", path);
}

}  // namespace ariw

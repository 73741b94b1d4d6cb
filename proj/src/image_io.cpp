/* Copyright 2026 The DSTN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "dstn/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>

#include "dstn/serialize.hpp"

namespace dstn {

bool has_image_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

namespace {

cv::Mat read_unchanged(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw LoadError("image not found: " + path.string());
  }
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw LoadError("cannot decode image: " + path.string());
  if (m.depth() == CV_16U) {
    m.convertTo(m, CV_8U, 1.0 / 257.0);
  } else if (m.depth() != CV_8U) {
    throw LoadError("unsupported pixel depth in " + path.string());
  }
  return m;
}

Raster to_raster(const cv::Mat& m) {
  Raster r;
  r.width = m.cols;
  r.height = m.rows;
  r.channels = m.channels();
  r.pixels.resize(static_cast<size_t>(m.total()) * m.channels());
  cv::Mat dst(m.rows, m.cols, m.type(), r.pixels.data());
  m.copyTo(dst);
  return r;
}

}  // namespace

Raster decode_image(const std::filesystem::path& path) {
  cv::Mat m = read_unchanged(path);
  switch (m.channels()) {
    case 1:
      break;
    case 3:
      cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
      break;
    case 4:
      cv::cvtColor(m, m, cv::COLOR_BGRA2RGBA);
      break;
    default:
      throw LoadError("unsupported channel count " +
                      std::to_string(m.channels()) + " in " + path.string());
  }
  return to_raster(m);
}

Raster decode_label_image(const std::filesystem::path& path) {
  cv::Mat m = read_unchanged(path);
  if (m.channels() != 1) {
    throw LoadError("label image must be single-channel: " + path.string());
  }
  return to_raster(m);
}

void write_png(const std::filesystem::path& path, const Raster& raster) {
  int type = 0;
  switch (raster.channels) {
    case 1: type = CV_8UC1; break;
    case 3: type = CV_8UC3; break;
    case 4: type = CV_8UC4; break;
    default: throw ShapeError("write_png: unsupported channel count");
  }
  cv::Mat m(raster.height, raster.width, type,
            const_cast<uint8_t*>(raster.pixels.data()));
  cv::Mat bgr;
  if (raster.channels == 3) {
    cv::cvtColor(m, bgr, cv::COLOR_RGB2BGR);
  } else if (raster.channels == 4) {
    cv::cvtColor(m, bgr, cv::COLOR_RGBA2BGRA);
  } else {
    bgr = m;
  }
  std::vector<uint8_t> bytes;
  if (!cv::imencode(".png", bgr, bytes)) {
    throw LoadError("PNG encoding failed for " + path.string());
  }
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                           bytes.size()));
}

Raster denormalize(const Tensor& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) {
    throw ShapeError("denormalize expects 3 x H x W, got " + shape_string(chw.shape()));
  }
  Raster r;
  r.height = static_cast<int>(chw.dim(1));
  r.width = static_cast<int>(chw.dim(2));
  r.channels = 3;
  r.pixels.resize(static_cast<size_t>(r.width) * r.height * 3);
  const int64_t plane = chw.dim(1) * chw.dim(2);
  for (int64_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = (static_cast<double>(chw[c * plane + i]) + 1.0) * 127.5;
      r.pixels[static_cast<size_t>(i) * 3 + c] =
          static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return r;
}

}  // namespace dstn

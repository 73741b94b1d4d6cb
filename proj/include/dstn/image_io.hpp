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
#ifndef DSTN_IMAGE_IO_HPP_
#define DSTN_IMAGE_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dstn/tensor.hpp"

namespace dstn {

// Decoded 8-bit image, interleaved, channels in R, G, B(, A) order.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;

  uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
};

bool has_image_extension(const std::filesystem::path& path);

// Throws LoadError when the file is missing or cannot be decoded. 16-bit
// images are scaled to 8 bits.
Raster decode_image(const std::filesystem::path& path);

// PNG, written atomically (temp file + rename).
void write_png(const std::filesystem::path& path, const Raster& raster);

// Single-channel label image (e.g. a segmentation mask), values untouched.
Raster decode_label_image(const std::filesystem::path& path);

// 3 x H x W tensor in [-1, 1] -> 8-bit RGB raster, rounding to nearest.
Raster denormalize(const Tensor& chw);

}  // namespace dstn

#endif  // DSTN_IMAGE_IO_HPP_

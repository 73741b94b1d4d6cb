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
#include "dstn/synthetic.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dstn/errors.hpp"

namespace dstn {

namespace {

uint8_t clamp8(double v) { return static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

struct Rgb {
  double r, g, b;
};

// Base colour plus uniform per-channel jitter. Each domain keeps a narrow
// palette: a normalized generator cannot recover arbitrary flat colours.
Rgb jittered(std::mt19937_64& rng, Rgb base, double spread) {
  std::uniform_real_distribution<double> u(-spread, spread);
  return {base.r + u(rng), base.g + u(rng), base.b + u(rng)};
}

void put(Raster& img, int x, int y, const Rgb& c) {
  uint8_t* p = img.pixels.data() + (static_cast<size_t>(y) * img.width + x) * 3;
  p[0] = clamp8(c.r);
  p[1] = clamp8(c.g);
  p[2] = clamp8(c.b);
}

void check_size(int size) {
  if (size < 8) throw ConfigError("synthetic images need size >= 8");
}

}  // namespace

Raster textured_square(int size, std::mt19937_64& rng) {
  check_size(size);
  Raster img{size, size, 3, std::vector<uint8_t>(static_cast<size_t>(size) * size * 3)};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Rgb bg = jittered(rng, {205, 190, 160}, 12);
  const Rgb ink = jittered(rng, {70, 45, 35}, 12);
  const Rgb paper = jittered(rng, {225, 200, 120}, 12);
  const int side = static_cast<int>(size * (0.45 + 0.3 * u(rng)));
  const int x0 = static_cast<int>(u(rng) * (size - side));
  const int y0 = static_cast<int>(u(rng) * (size - side));
  const double angle = u(rng) * std::numbers::pi;
  const double freq = 2.0 * std::numbers::pi / (8.0 + 6.0 * u(rng));
  const double ca = std::cos(angle), sa = std::sin(angle);
  std::normal_distribution<double> grain(0.0, 5.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      Rgb c = bg;
      if (x >= x0 && x < x0 + side && y >= y0 && y < y0 + side) {
        const double t = 0.5 + 0.5 * std::sin(freq * (x * ca + y * sa));
        c = {ink.r * t + paper.r * (1 - t), ink.g * t + paper.g * (1 - t),
             ink.b * t + paper.b * (1 - t)};
      }
      const double n = grain(rng);
      put(img, x, y, {c.r + n, c.g + n, c.b + n});
    }
  }
  return img;
}

Raster smooth_circle(int size, std::mt19937_64& rng) {
  check_size(size);
  Raster img{size, size, 3, std::vector<uint8_t>(static_cast<size_t>(size) * size * 3)};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Rgb top = jittered(rng, {110, 150, 215}, 12);
  const Rgb bottom = jittered(rng, {190, 205, 225}, 12);
  const Rgb disc = jittered(rng, {215, 110, 60}, 15);
  const double radius = size * (0.18 + 0.15 * u(rng));
  const double cx = radius + u(rng) * (size - 2 * radius);
  const double cy = radius + u(rng) * (size - 2 * radius);
  for (int y = 0; y < size; ++y) {
    const double t = static_cast<double>(y) / (size - 1);
    const Rgb back{top.r * (1 - t) + bottom.r * t, top.g * (1 - t) + bottom.g * t,
                   top.b * (1 - t) + bottom.b * t};
    for (int x = 0; x < size; ++x) {
      const double d = std::hypot(x - cx, y - cy) / radius;
      if (d < 1.0) {
        // Domed shading, brightest at the centre.
        const double shade = 0.75 + 0.25 * std::sqrt(1.0 - d * d);
        put(img, x, y, {disc.r * shade, disc.g * shade, disc.b * shade});
      } else {
        put(img, x, y, back);
      }
    }
  }
  cv::Mat m(size, size, CV_8UC3, img.pixels.data());
  cv::GaussianBlur(m, m, cv::Size(5, 5), 1.2);
  return img;
}

void write_toy_domains(const std::filesystem::path& root, int train_count, int test_count,
                       int size, uint64_t seed) {
  if (train_count < 0 || test_count < 0) throw ConfigError("counts must be >= 0");
  std::mt19937_64 rng(seed);
  auto emit = [&](const char* split, int count) {
    if (count == 0) return;
    const auto x_dir = root / split / "X";
    const auto y_dir = root / split / "Y";
    std::filesystem::create_directories(x_dir);
    std::filesystem::create_directories(y_dir);
    for (int i = 0; i < count; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "%04d.png", i);
      write_png(x_dir / (std::string("square_") + name), textured_square(size, rng));
      write_png(y_dir / (std::string("circle_") + name), smooth_circle(size, rng));
    }
  };
  emit("train", train_count);
  emit("test", test_count);
}

}  // namespace dstn

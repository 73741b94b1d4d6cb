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
#ifndef DSTN_SYNTHETIC_HPP_
#define DSTN_SYNTHETIC_HPP_

#include <cstdint>
#include <filesystem>
#include <random>

#include "dstn/image_io.hpp"

namespace dstn {

// Painting-like stand-in: a square filled with an oriented stripe texture
// plus grain, on a flat background.
Raster textured_square(int size, std::mt19937_64& rng);

// Photo-like stand-in: a softly shaded disc over a smooth gradient.
Raster smooth_circle(int size, std::mt19937_64& rng);

// Writes <root>/<split>/X/*.png (squares) and <root>/<split>/Y/*.png
// (circles), `count` of each, for every split with count > 0.
void write_toy_domains(const std::filesystem::path& root, int train_count,
                       int test_count, int size, uint64_t seed);

}  // namespace dstn

#endif  // DSTN_SYNTHETIC_HPP_

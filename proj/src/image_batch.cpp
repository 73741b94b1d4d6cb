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
#include "dstn/image_batch.hpp"

#include <cmath>

namespace dstn {

std::string_view domain_name(Domain d) {
  return d == Domain::kPaintings ? "X" : "Y";
}

void ImageBatch::validate() const {
  const Shape& s = data.shape();
  if (s.size() != 4 || s[1] != 3) {
    throw ShapeError("image batch must be N x 3 x H x W, got " + shape_string(s));
  }
  if (s[2] < 32 || s[3] < 32 || s[2] % 4 != 0 || s[3] % 4 != 0) {
    throw ShapeError("image height/width must be >= 32 and divisible by 4, got " +
                     shape_string(s));
  }
  if (static_cast<int64_t>(ids.size()) != s[0]) {
    throw ShapeError("image batch has " + std::to_string(ids.size()) +
                     " ids for " + std::to_string(s[0]) + " images");
  }
  for (float v : data.values()) {
    if (!std::isfinite(v) || v < -1.0f || v > 1.0f) {
      throw ShapeError("image values must be finite and within [-1, 1]");
    }
  }
}

}  // namespace dstn

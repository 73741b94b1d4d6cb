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
#ifndef DSTN_IMAGE_BATCH_HPP_
#define DSTN_IMAGE_BATCH_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "dstn/tensor.hpp"

namespace dstn {

// X holds the source paintings, Y the natural photographs.
enum class Domain { kPaintings, kNatural };

std::string_view domain_name(Domain d);

// N x 3 x H x W images normalized to [-1, 1], tagged with their domain.
struct ImageBatch {
  Tensor data;
  Domain domain = Domain::kPaintings;
  std::vector<std::string> ids;

  int64_t size() const { return data.empty() ? 0 : data.dim(0); }

  // Throws ShapeError when the tensor is not N x 3 x H x W with H, W >= 32
  // and divisible by 4, ids do not match N, or any value is non-finite or
  // outside [-1, 1].
  void validate() const;
};

}  // namespace dstn

#endif  // DSTN_IMAGE_BATCH_HPP_

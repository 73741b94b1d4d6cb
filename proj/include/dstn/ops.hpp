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
#ifndef DSTN_OPS_HPP_
#define DSTN_OPS_HPP_

#include <span>
#include <vector>

#include "dstn/autograd.hpp"

// Differentiable tensor operations on NCHW float tensors.
namespace dstn::ops {

// Output size of a strided window along one axis; may be <= 0.
inline int64_t conv_out_size(int64_t in, int kernel, int stride, int padding) {
  const int64_t span = in + 2 * padding - kernel;
  return span < 0 ? 0 : span / stride + 1;
}

// weight [out, in, k, k]; bias [out] or undefined. Zero padding.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride,
           int padding);

// weight [in, out, k, k]; output size (H-1)*stride - 2*padding + k + output_padding.
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias,
                     int stride, int padding, int output_padding);

Var reflection_pad2d(const Var& x, int pad);

// Per-sample, per-channel normalization without affine parameters.
Var instance_norm(const Var& x, float eps = 1e-5f);
// Per-channel normalization over (N, H, W) using the statistics of the
// current batch; no running averages are kept.
Var batch_norm(const Var& x, float eps = 1e-5f);

Var relu(const Var& x);
Var leaky_relu(const Var& x, float slope);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var add(const Var& a, const Var& b);

// 2x2 window, stride 2, floor on odd sizes.
Var max_pool2d(const Var& x);
// [N, C, H, W] -> [N, C]
Var global_avg_pool(const Var& x);
// x [N, D], weight [O, D], bias [O].
Var linear(const Var& x, const Var& weight, const Var& bias);
// y[n,c,h,w] = x[n,c,h,w] * scale[c] + shift[c] with constant scale/shift.
Var channel_affine(const Var& x, std::span<const float> scale,
                   std::span<const float> shift);

// Mean softmax cross-entropy over the batch. logits [N, K].
Var cross_entropy(const Var& logits, std::span<const int> labels);

// Sum_i weights[i] * scalars[i]; every scalar is single-element.
Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights);

}  // namespace dstn::ops

#endif  // DSTN_OPS_HPP_

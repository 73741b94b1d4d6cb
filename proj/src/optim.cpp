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
#include "dstn/optim.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>

namespace dstn {

std::string parameters_checksum(const ParameterList& params) {
  uLong crc = crc32(0L, Z_NULL, 0);
  for (const auto& p : params) {
    const Tensor& t = p.var.value();
    crc = crc32(crc, reinterpret_cast<const Bytef*>(t.data()),
                static_cast<uInt>(t.numel() * sizeof(float)));
  }
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08lx", crc & 0xffffffffUL);
  return buf;
}

std::optional<std::string> first_non_finite(const ParameterList& params) {
  for (const auto& p : params) {
    for (float v : p.var.value().values()) {
      if (!std::isfinite(v)) return p.name;
    }
  }
  return std::nullopt;
}

void set_requires_grad(const ParameterList& params, bool on) {
  for (const auto& p : params) p.var.node()->requires_grad = on;
}

void zero_grad(const ParameterList& params) {
  for (const auto& p : params) p.var.node()->grad = Tensor();
}

Adam::Adam(ParameterList params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
}

void Adam::zero_grad() { dstn::zero_grad(params_); }

void Adam::step(double lr) {
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const float step_size = static_cast<float>(lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(options_.eps);
  const float fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
  for (size_t i = 0; i < params_.size(); ++i) {
    Node& node = *params_[i].var.node();
    if (node.grad.empty()) continue;
    float* w = node.value.data();
    const float* g = node.grad.data();
    float* m = m_[i].data();
    float* v = v_[i].data();
    for (int64_t k = 0; k < node.value.numel(); ++k) {
      m[k] = fb1 * m[k] + (1.0f - fb1) * g[k];
      v[k] = fb2 * v[k] + (1.0f - fb2) * g[k] * g[k];
      w[k] -= step_size * m[k] / (std::sqrt(v[k] * inv_c2) + eps);
    }
  }
}

}  // namespace dstn

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
#ifndef DSTN_OPTIM_HPP_
#define DSTN_OPTIM_HPP_

#include <optional>
#include <string>
#include <vector>

#include "dstn/autograd.hpp"

namespace dstn {

struct NamedParameter {
  std::string name;
  Var var;
};
using ParameterList = std::vector<NamedParameter>;

// CRC-32 over every parameter tensor in list order.
std::string parameters_checksum(const ParameterList& params);

// Name of the first parameter holding a NaN/Inf, if any.
std::optional<std::string> first_non_finite(const ParameterList& params);

void set_requires_grad(const ParameterList& params, bool on);
void zero_grad(const ParameterList& params);

struct AdamOptions {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamOptions&) const = default;
};

// Adam with bias correction. Moments are owned here and exposed for
// checkpointing.
class Adam {
 public:
  Adam() = default;
  Adam(ParameterList params, AdamOptions options = {});

  void zero_grad();
  // Parameters without a gradient this step are left untouched.
  void step(double lr);

  int64_t steps() const { return steps_; }
  void set_steps(int64_t steps) { steps_ = steps; }
  const AdamOptions& options() const { return options_; }
  const ParameterList& parameters() const { return params_; }
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  ParameterList params_;
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  int64_t steps_ = 0;
};

}  // namespace dstn

#endif  // DSTN_OPTIM_HPP_

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
#include "dstn/losses.hpp"

#include <utility>

namespace dstn {

void LossWeights::validate() const {
  const std::pair<const char*, double> all[] = {
      {"alpha_g", alpha_g}, {"alpha_f", alpha_f}, {"beta", beta}, {"gamma", gamma}};
  for (const auto& [name, v] : all) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ConfigError(std::string("loss weight ") + name +
                        " must be finite and >= 0, got " + std::to_string(v));
    }
  }
}

double total_generator_objective(const LossReport& r, const LossWeights& w) {
  const std::pair<const char*, double> terms[] = {
      {"adv_g", r.adv_g}, {"adv_f", r.adv_f}, {"cyc_g", r.cyc_g},
      {"cyc_f", r.cyc_f}, {"id_g", r.id_g},   {"id_f", r.id_f},
      {"con_g", r.con_g}, {"con_f", r.con_f}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) {
      throw NonFiniteError(name, std::string("non-finite loss term ") + name);
    }
  }
  return r.adv_g + r.adv_f + w.alpha_g * r.cyc_g + w.alpha_f * r.cyc_f +
         w.beta * (r.id_g + r.id_f) + w.gamma * (r.con_g + r.con_f);
}

namespace {

void add_into(Node& node, const Tensor& grad, float scale) {
  if (!node.requires_grad) return;
  float* d = node.grad_buffer().data();
  for (int64_t i = 0; i < grad.numel(); ++i) d[i] += scale * grad[i];
}

// Loss of (target, produced) whose gradient w.r.t. target is the negation of
// the gradient w.r.t. produced.
template <typename Kernel>
Var difference_loss(const Var& target, const Var& produced, Kernel&& kernel) {
  auto graded = kernel(target.value(), produced.value());
  return make_result(Tensor({1}, graded.value), {target, produced},
                     [grad = std::move(graded.grad)](Node& self) {
                       const float g = self.grad[0];
                       add_into(*self.inputs[0], grad, -g);
                       add_into(*self.inputs[1], grad, g);
                     });
}

}  // namespace

Var loss_adv_discriminator(const Var& real_scores, const Var& fake_scores,
                           AdversarialVariant variant) {
  auto graded = loss_kernels::adversarial_discriminator(
      real_scores.value(), fake_scores.value(), variant);
  return make_result(Tensor({1}, graded.value), {real_scores, fake_scores},
                     [gr = std::move(graded.grad_real),
                      gf = std::move(graded.grad_fake)](Node& self) {
                       add_into(*self.inputs[0], gr, self.grad[0]);
                       add_into(*self.inputs[1], gf, self.grad[0]);
                     });
}

Var loss_adv_generator(const Var& fake_scores, AdversarialVariant variant) {
  auto graded = loss_kernels::adversarial_generator(fake_scores.value(), variant);
  return make_result(Tensor({1}, graded.value), {fake_scores},
                     [g = std::move(graded.grad)](Node& self) {
                       add_into(*self.inputs[0], g, self.grad[0]);
                     });
}

Var loss_cycle(const Var& original, const Var& reconstructed) {
  return difference_loss(original, reconstructed, [](const Tensor& a, const Tensor& b) {
    return loss_kernels::l1_mean(a, b, "loss_cycle");
  });
}

Var loss_identity(const Var& target_domain_input, const Var& generator_output) {
  return difference_loss(target_domain_input, generator_output,
                         [](const Tensor& a, const Tensor& b) {
                           return loss_kernels::l1_mean(a, b, "loss_identity");
                         });
}

Var loss_content(const FeatureMap& features_in, const FeatureMap& features_out) {
  if (features_in.tap != features_out.tap) {
    throw ShapeError("loss_content: tap mismatch '" + features_in.tap +
                     "' vs '" + features_out.tap + "'");
  }
  return difference_loss(features_in.values, features_out.values,
                         [](const Tensor& a, const Tensor& b) {
                           return loss_kernels::squared_mean(a, b, "loss_content");
                         });
}

}  // namespace dstn

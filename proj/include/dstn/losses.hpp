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
#ifndef DSTN_LOSSES_HPP_
#define DSTN_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <concepts>
#include <string>

#include "dstn/autograd.hpp"
#include "dstn/tensor.hpp"

namespace dstn {

enum class AdversarialVariant { kNll, kLeastSquares };

// Probabilities fed to the log-likelihood losses are clamped to [eps, 1-eps].
inline constexpr double kNllEpsilon = 1e-7;

struct LossWeights {
  double alpha_g = 1.0;
  double alpha_f = 0.5;
  double beta = 10.0;
  double gamma = 1.0;

  // All weights finite and >= 0.
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

// Per-batch means of every objective term. Entries for skipped terms are 0.
struct LossReport {
  double adv_g = 0.0;   // generator side of the G/D_y game
  double adv_f = 0.0;   // generator side of the F/D_x game
  double adv_dx = 0.0;  // discriminator losses
  double adv_dy = 0.0;
  double cyc_g = 0.0;  // |F(G(x)) - x|
  double cyc_f = 0.0;  // |G(F(y)) - y|
  double id_g = 0.0;   // |G(y) - y|
  double id_f = 0.0;   // |F(x) - x|
  double con_g = 0.0;  // |phi(G(x)) - phi(x)|^2
  double con_f = 0.0;  // |phi(F(y)) - phi(y)|^2
  double total_g = 0.0;

  bool operator==(const LossReport&) const = default;
};

// adv_g + adv_f + alpha_g*cyc_g + alpha_f*cyc_f + beta*(id_g + id_f)
//   + gamma*(con_g + con_f).
// Throws NonFiniteError naming the first non-finite component.
double total_generator_objective(const LossReport& report, const LossWeights& w);

// Value and gradient kernels. Reductions are means over every element; sums
// are accumulated in double. Gradients are taken w.r.t. the generated /
// scored argument(s).
namespace loss_kernels {

template <std::floating_point T>
struct Graded {
  T value{};
  BasicTensor<T> grad;
};

template <std::floating_point T>
struct GradedPair {
  T value{};
  BasicTensor<T> grad_real;
  BasicTensor<T> grad_fake;
};

template <std::floating_point T>
T clamp_probability(T p) {
  const T eps = static_cast<T>(kNllEpsilon);
  return std::clamp(p, eps, T{1} - eps);
}

template <std::floating_point T>
bool inside_clamp(T p) {
  const T eps = static_cast<T>(kNllEpsilon);
  return p >= eps && p <= T{1} - eps;
}

// Least squares: 1/2 mean((r - 1)^2) + 1/2 mean(f^2).
// Log-likelihood: -1/2 mean(log r) - 1/2 mean(log(1 - f)) on probabilities.
template <std::floating_point T>
GradedPair<T> adversarial_discriminator(const BasicTensor<T>& real,
                                        const BasicTensor<T>& fake,
                                        AdversarialVariant variant) {
  require_same_shape(real, fake, "loss_adv_discriminator");
  GradedPair<T> out{T{}, BasicTensor<T>(real.shape()),
                    BasicTensor<T>(fake.shape())};
  const int64_t n = real.numel();
  if (n == 0) throw ShapeError("loss_adv_discriminator: empty score map");
  const double inv = 1.0 / static_cast<double>(n);
  double acc_r = 0.0, acc_f = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const T r = real[i], f = fake[i];
    if (variant == AdversarialVariant::kLeastSquares) {
      acc_r += (double(r) - 1.0) * (double(r) - 1.0);
      acc_f += double(f) * double(f);
      out.grad_real[i] = static_cast<T>((double(r) - 1.0) * inv);
      out.grad_fake[i] = static_cast<T>(double(f) * inv);
    } else {
      const double rc = clamp_probability(r), fc = clamp_probability(f);
      acc_r -= std::log(rc);
      acc_f -= std::log(1.0 - fc);
      out.grad_real[i] = inside_clamp(r) ? static_cast<T>(-0.5 * inv / rc) : T{0};
      out.grad_fake[i] =
          inside_clamp(f) ? static_cast<T>(0.5 * inv / (1.0 - fc)) : T{0};
    }
  }
  out.value = static_cast<T>(0.5 * acc_r * inv + 0.5 * acc_f * inv);
  return out;
}

// Least squares: mean((f - 1)^2). Log-likelihood: mean(log(1 - f)), the
// generator's side of the min-max game as written.
template <std::floating_point T>
Graded<T> adversarial_generator(const BasicTensor<T>& fake,
                                AdversarialVariant variant) {
  Graded<T> out{T{}, BasicTensor<T>(fake.shape())};
  const int64_t n = fake.numel();
  if (n == 0) throw ShapeError("loss_adv_generator: empty score map");
  const double inv = 1.0 / static_cast<double>(n);
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const T f = fake[i];
    if (variant == AdversarialVariant::kLeastSquares) {
      acc += (double(f) - 1.0) * (double(f) - 1.0);
      out.grad[i] = static_cast<T>(2.0 * (double(f) - 1.0) * inv);
    } else {
      const double fc = clamp_probability(f);
      acc += std::log(1.0 - fc);
      out.grad[i] = inside_clamp(f) ? static_cast<T>(-inv / (1.0 - fc)) : T{0};
    }
  }
  out.value = static_cast<T>(acc * inv);
  return out;
}

// mean |produced - target|; gradient w.r.t. produced (0 where equal).
template <std::floating_point T>
Graded<T> l1_mean(const BasicTensor<T>& target, const BasicTensor<T>& produced,
                  const char* what = "l1_mean") {
  require_same_shape(target, produced, what);
  Graded<T> out{T{}, BasicTensor<T>(produced.shape())};
  const int64_t n = produced.numel();
  if (n == 0) throw ShapeError(std::string(what) + ": empty tensors");
  const double inv = 1.0 / static_cast<double>(n);
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = double(produced[i]) - double(target[i]);
    acc += std::abs(d);
    out.grad[i] = static_cast<T>(d > 0 ? inv : (d < 0 ? -inv : 0.0));
  }
  out.value = static_cast<T>(acc * inv);
  return out;
}

// mean (produced - target)^2; gradient w.r.t. produced.
template <std::floating_point T>
Graded<T> squared_mean(const BasicTensor<T>& target,
                       const BasicTensor<T>& produced,
                       const char* what = "squared_mean") {
  require_same_shape(target, produced, what);
  Graded<T> out{T{}, BasicTensor<T>(produced.shape())};
  const int64_t n = produced.numel();
  if (n == 0) throw ShapeError(std::string(what) + ": empty tensors");
  const double inv = 1.0 / static_cast<double>(n);
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = double(produced[i]) - double(target[i]);
    acc += d * d;
    out.grad[i] = static_cast<T>(2.0 * d * inv);
  }
  out.value = static_cast<T>(acc * inv);
  return out;
}

}  // namespace loss_kernels

// Feature activations tagged with the extractor tap they came from.
struct FeatureMap {
  Var values;
  std::string tap;
};

// Differentiable forms of the kernels above. Score maps are raw
// discriminator outputs for least squares and probabilities for kNll.
Var loss_adv_discriminator(const Var& real_scores, const Var& fake_scores,
                           AdversarialVariant variant);
Var loss_adv_generator(const Var& fake_scores, AdversarialVariant variant);
Var loss_cycle(const Var& original, const Var& reconstructed);
Var loss_identity(const Var& target_domain_input, const Var& generator_output);
// Throws ShapeError on a shape or tap mismatch.
Var loss_content(const FeatureMap& features_in, const FeatureMap& features_out);

}  // namespace dstn

#endif  // DSTN_LOSSES_HPP_

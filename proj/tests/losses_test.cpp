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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

namespace dstn {
namespace {

using DTensor = BasicTensor<double>;
using namespace loss_kernels;

DTensor random_double(const Shape& shape, uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  DTensor t(shape);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

// Independent oracles: straightforward loops, no shared code with the kernels.
double l1_oracle(const DTensor& a, const DTensor& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) s += std::fabs(a[i] - b[i]);
  return s / static_cast<double>(a.numel());
}
double mse_oracle(const DTensor& a, const DTensor& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.numel());
}

// ||analytic - numeric|| / max(||analytic||, ||numeric||) with central
// differences on the value function.
template <typename ValueFn>
double relative_gradient_error(const DTensor& x0, const DTensor& analytic,
                               ValueFn&& value, double h = 1e-6) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (int64_t i = 0; i < x0.numel(); ++i) {
    DTensor plus = x0, minus = x0;
    plus[i] += h;
    minus[i] -= h;
    const double numeric = (value(plus) - value(minus)) / (2.0 * h);
    diff += (analytic[i] - numeric) * (analytic[i] - numeric);
    na += analytic[i] * analytic[i];
    nn += numeric * numeric;
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-300});
}

const Shape kImage{1, 3, 8, 8};

TEST(LossWeightsTest, DefaultsAreOneHalfTenOne) {
  LossWeights w;
  EXPECT_EQ(w.alpha_g, 1.0);
  EXPECT_EQ(w.alpha_f, 0.5);
  EXPECT_EQ(w.beta, 10.0);
  EXPECT_EQ(w.gamma, 1.0);
  EXPECT_NO_THROW(w.validate());
  EXPECT_THROW((LossWeights{-1, 0, 0, 0}.validate()), ConfigError);
  EXPECT_THROW((LossWeights{0, 0, NAN, 0}.validate()), ConfigError);
}

TEST(AdversarialLossTest, LeastSquaresDiscriminatorExamples) {
  const Tensor ones({1, 1, 4, 4}, 1.0f), zeros({1, 1, 4, 4}, 0.0f);
  const auto v = AdversarialVariant::kLeastSquares;
  EXPECT_EQ(adversarial_discriminator(ones, zeros, v).value, 0.0f);
  EXPECT_FLOAT_EQ(adversarial_discriminator(zeros, ones, v).value, 1.0f);
  EXPECT_THROW(adversarial_discriminator(ones, Tensor({1, 1, 4, 5}), v), ShapeError);
}

TEST(AdversarialLossTest, NllPerfectDiscriminatorIsNearZero) {
  const BasicTensor<double> ones({1, 1, 4, 4}, 1.0), zeros({1, 1, 4, 4}, 0.0);
  const double v =
      adversarial_discriminator(ones, zeros, AdversarialVariant::kNll).value;
  // -1/2 log(1 - eps) - 1/2 log(1 - eps)
  EXPECT_NEAR(v, -std::log(1.0 - 1e-7), 1e-15);
  EXPECT_LT(v, 1e-6);
}

TEST(AdversarialLossTest, LeastSquaresGeneratorExamples) {
  const auto v = AdversarialVariant::kLeastSquares;
  EXPECT_EQ(adversarial_generator(Tensor({1, 1, 3, 3}, 1.0f), v).value, 0.0f);
  EXPECT_FLOAT_EQ(adversarial_generator(Tensor({1, 1, 3, 3}, 0.0f), v).value, 1.0f);
  EXPECT_FLOAT_EQ(adversarial_generator(Tensor({1, 1, 3, 3}, 0.5f), v).value, 0.25f);
}

TEST(ReconstructionLossTest, CycleExamples) {
  Var a(testing::random_tensor(kImage, 1));
  EXPECT_EQ(loss_cycle(a, a).item(), 0.0f);
  EXPECT_FLOAT_EQ(loss_cycle(Var(Tensor(kImage, 0.0f)), Var(Tensor(kImage, 0.5f))).item(),
                  0.5f);
  EXPECT_THROW(loss_cycle(a, Var(Tensor({1, 3, 8, 4}))), ShapeError);
}

TEST(ReconstructionLossTest, IdentityExamples) {
  Var y(testing::random_tensor(kImage, 2));
  EXPECT_EQ(loss_identity(y, y).item(), 0.0f);
  Tensor shifted = y.value();
  for (float& v : shifted.values()) v += 0.1f;
  EXPECT_NEAR(loss_identity(y, Var(shifted)).item(), 0.1f, 1e-6);
}

TEST(ReconstructionLossTest, ContentExamples) {
  Var f(testing::random_tensor({1, 16, 4, 4}, 3));
  EXPECT_EQ(loss_content({f, "relu2_2"}, {f, "relu2_2"}).item(), 0.0f);
  Tensor g = f.value();
  for (float& v : g.values()) v += 0.3f;
  EXPECT_NEAR(loss_content({f, "relu2_2"}, {Var(g), "relu2_2"}).item(), 0.09f, 1e-5);
  EXPECT_THROW(loss_content({f, "relu2_2"}, {Var(g), "relu1_2"}), ShapeError);
  EXPECT_THROW(loss_content({f, "relu2_2"}, {Var(Tensor({1, 16, 4, 2})), "relu2_2"}),
               ShapeError);
}

TEST(ReconstructionLossTest, MatchesBruteForceOracles) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const DTensor a = random_double(kImage, seed, -1, 1);
    const DTensor b = random_double(kImage, seed + 1000, -1, 1);
    EXPECT_NEAR(l1_mean(a, b).value, l1_oracle(a, b), 1e-14);
    EXPECT_NEAR(squared_mean(a, b).value, mse_oracle(a, b), 1e-14);
    // Symmetry of the cycle loss.
    EXPECT_NEAR(l1_mean(a, b).value, l1_mean(b, a).value, 1e-15);
  }
}

TEST(LossPropertyTest, NonNegativeAndZeroOnlyWhenEqual) {
  for (uint64_t seed = 0; seed < 50; ++seed) {
    const DTensor a = random_double(kImage, seed, -1, 1);
    DTensor b = random_double(kImage, seed + 77, -1, 1);
    EXPECT_GT(l1_mean(a, b).value, 0.0);
    EXPECT_GT(squared_mean(a, b).value, 0.0);
    EXPECT_GE(adversarial_discriminator(a, b, AdversarialVariant::kLeastSquares).value, 0.0);
    EXPECT_GE(adversarial_generator(b, AdversarialVariant::kLeastSquares).value, 0.0);
    EXPECT_LT(std::fabs(l1_mean(a, a).value), 1e-7);
    EXPECT_LT(std::fabs(squared_mean(a, a).value), 1e-7);
  }
}

TEST(LossGradientTest, AllTermsMatchFiniteDifferencesInDouble) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const DTensor target = random_double(kImage, seed, -1, 1);
    const DTensor produced = random_double(kImage, seed + 500, -1, 1);
    const DTensor probs = random_double(kImage, seed + 900, 0.05, 0.95);
    const DTensor real_probs = random_double(kImage, seed + 1300, 0.05, 0.95);

    EXPECT_LT(relative_gradient_error(produced, l1_mean(target, produced).grad,
                                      [&](const DTensor& p) { return l1_mean(target, p).value; }),
              1e-3) << "cycle/identity, seed " << seed;
    EXPECT_LT(relative_gradient_error(produced, squared_mean(target, produced).grad,
                                      [&](const DTensor& p) { return squared_mean(target, p).value; }),
              1e-3) << "content, seed " << seed;
    for (auto variant : {AdversarialVariant::kLeastSquares, AdversarialVariant::kNll}) {
      const DTensor& fake = variant == AdversarialVariant::kNll ? probs : produced;
      const DTensor& real = variant == AdversarialVariant::kNll ? real_probs : target;
      EXPECT_LT(relative_gradient_error(
                    fake, adversarial_generator(fake, variant).grad,
                    [&](const DTensor& f) { return adversarial_generator(f, variant).value; }),
                1e-3) << "adv generator, seed " << seed;
      const auto d = adversarial_discriminator(real, fake, variant);
      EXPECT_LT(relative_gradient_error(
                    fake, d.grad_fake,
                    [&](const DTensor& f) { return adversarial_discriminator(real, f, variant).value; }),
                1e-3) << "adv discriminator (fake), seed " << seed;
      EXPECT_LT(relative_gradient_error(
                    real, d.grad_real,
                    [&](const DTensor& r) { return adversarial_discriminator(r, fake, variant).value; }),
                1e-3) << "adv discriminator (real), seed " << seed;
    }
  }
}

TEST(LossAutogradTest, WrappersRouteGradientsToBothArguments) {
  Var a(testing::random_tensor(kImage, 5), true);
  Var b(testing::random_tensor(kImage, 6), true);
  backward(loss_cycle(a, b));
  for (int64_t i = 0; i < a.value().numel(); ++i) {
    EXPECT_FLOAT_EQ(a.grad()[i], -b.grad()[i]);
  }
  Var r(Tensor({1, 1, 2, 2}, 0.2f), true), f(Tensor({1, 1, 2, 2}, 0.7f), true);
  backward(loss_adv_discriminator(r, f, AdversarialVariant::kLeastSquares));
  EXPECT_FLOAT_EQ(r.grad()[0], (0.2f - 1.0f) / 4.0f);
  EXPECT_FLOAT_EQ(f.grad()[0], 0.7f / 4.0f);
}

TEST(TotalObjectiveTest, Examples) {
  LossReport adversarial_only;
  adversarial_only.adv_g = 0.6;
  adversarial_only.adv_f = 0.4;
  adversarial_only.cyc_g = 3.0;
  adversarial_only.id_f = 7.0;
  adversarial_only.con_g = 11.0;
  EXPECT_EQ(total_generator_objective(adversarial_only, {0, 0, 0, 0}), 1.0);

  LossReport r;
  r.cyc_g = 1.0;
  r.cyc_f = 1.0;
  r.id_g = 0.5;
  r.id_f = 0.5;
  r.con_g = 0.25;
  r.con_f = 0.75;
  EXPECT_DOUBLE_EQ(total_generator_objective(r, LossWeights{}), 12.5);
  EXPECT_EQ(total_generator_objective(LossReport{}, LossWeights{}), 0.0);
}

TEST(TotalObjectiveTest, NonFiniteTermIsNamed) {
  LossReport r;
  r.con_f = INFINITY;
  try {
    total_generator_objective(r, LossWeights{});
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.term(), "con_f");
  }
}

TEST(TotalObjectiveTest, LinearInEachWeight) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    LossReport r{u(rng), u(rng), 0, 0, u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), 0};
    LossWeights w{u(rng), u(rng), u(rng), u(rng)};
    const double delta = 0.5;
    const double base = total_generator_objective(r, w);
    LossWeights wg = w, wf = w, wb = w, wc = w;
    wg.alpha_g += delta;
    wf.alpha_f += delta;
    wb.beta += delta;
    wc.gamma += delta;
    EXPECT_NEAR(total_generator_objective(r, wg) - base, delta * r.cyc_g, 1e-12);
    EXPECT_NEAR(total_generator_objective(r, wf) - base, delta * r.cyc_f, 1e-12);
    EXPECT_NEAR(total_generator_objective(r, wb) - base, delta * (r.id_g + r.id_f), 1e-12);
    EXPECT_NEAR(total_generator_objective(r, wc) - base, delta * (r.con_g + r.con_f), 1e-12);
  }
}

}  // namespace
}  // namespace dstn

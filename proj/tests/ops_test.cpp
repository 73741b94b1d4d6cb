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
#include "dstn/ops.hpp"

#include <gtest/gtest.h>

#include "dstn/optim.hpp"
#include "test_util.hpp"

namespace dstn {
namespace {

using testing::expect_gradient_matches;
using testing::random_tensor;

TEST(AutogradTest, SharedInputAccumulatesBothPaths) {
  Var x(Tensor({1, 1, 2, 2}, std::vector<float>{1, -2, 3, -4}), true);
  Var y = ops::add(ops::relu(x), x);
  Var total = ops::weighted_sum(std::vector<Var>{ops::global_avg_pool(y).detach()},
                                std::vector<double>{1.0});
  EXPECT_FALSE(total.requires_grad());

  Var pooled = ops::global_avg_pool(y);
  backward(pooled);
  // d/dx mean(relu(x) + x) = (1[x>0] + 1) / 4
  EXPECT_FLOAT_EQ(x.grad()[0], 0.5f);
  EXPECT_FLOAT_EQ(x.grad()[1], 0.25f);
}

TEST(AutogradTest, NoGradGuardSkipsTape) {
  Var x(Tensor({1, 1, 2, 2}, 1.0f), true);
  NoGradGuard guard;
  Var y = ops::relu(x);
  EXPECT_FALSE(y.requires_grad());
}

TEST(OpsGradientTest, Conv2dInputAndWeight) {
  Tensor w0 = random_tensor({4, 3, 3, 3}, 2, -0.5f, 0.5f);
  Tensor b0 = random_tensor({4}, 3);
  Tensor x0 = random_tensor({2, 3, 6, 7}, 1);
  expect_gradient_matches(
      [&](const Var& x) { return ops::conv2d(x, Var(w0), Var(b0), 2, 1); }, x0, 10);
  expect_gradient_matches(
      [&](const Var& w) { return ops::conv2d(Var(x0), w, Var(b0), 1, 1); }, w0, 11);
  expect_gradient_matches(
      [&](const Var& b) { return ops::conv2d(Var(x0), Var(w0), b, 1, 0); }, b0, 12);
}

TEST(OpsGradientTest, ConvTranspose2d) {
  Tensor w0 = random_tensor({3, 2, 3, 3}, 5, -0.5f, 0.5f);
  Tensor b0 = random_tensor({2}, 6);
  Tensor x0 = random_tensor({1, 3, 4, 5}, 4);
  Var y = ops::conv_transpose2d(Var(x0), Var(w0), Var(b0), 2, 1, 1);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 8, 10}));
  expect_gradient_matches(
      [&](const Var& x) { return ops::conv_transpose2d(x, Var(w0), Var(b0), 2, 1, 1); },
      x0, 20);
  expect_gradient_matches(
      [&](const Var& w) { return ops::conv_transpose2d(Var(x0), w, Var(b0), 2, 1, 1); },
      w0, 21);
  expect_gradient_matches(
      [&](const Var& b) { return ops::conv_transpose2d(Var(x0), Var(w0), b, 2, 1, 1); },
      b0, 22);
}

TEST(OpsGradientTest, ConvTransposeIsAdjointOfConv) {
  // <conv(x), y> == <x, conv_transpose(y)> for matching geometry, no bias.
  Tensor w0 = random_tensor({2, 3, 3, 3}, 7);
  Tensor x0 = random_tensor({1, 3, 8, 8}, 8);
  Var cx = ops::conv2d(Var(x0), Var(w0), Var(), 2, 1);
  Tensor y0 = random_tensor(cx.shape(), 9);
  Var ty = ops::conv_transpose2d(Var(y0), Var(w0), Var(), 2, 1, 1);
  ASSERT_EQ(ty.shape(), x0.shape());
  EXPECT_NEAR(testing::probe(cx.value(), y0), testing::probe(x0, ty.value()), 1e-4);
}

TEST(OpsGradientTest, NormalizationAndPadding) {
  Tensor x0 = random_tensor({2, 3, 5, 4}, 30);
  expect_gradient_matches([](const Var& x) { return ops::instance_norm(x); }, x0, 31);
  expect_gradient_matches([](const Var& x) { return ops::batch_norm(x); }, x0, 32);
  expect_gradient_matches([](const Var& x) { return ops::reflection_pad2d(x, 2); },
                          x0, 33);
}

TEST(OpsGradientTest, Pointwise) {
  Tensor x0 = random_tensor({1, 2, 4, 4}, 40, -2.0f, 2.0f);
  expect_gradient_matches([](const Var& x) { return ops::tanh(x); }, x0, 41);
  expect_gradient_matches([](const Var& x) { return ops::sigmoid(x); }, x0, 42);
  expect_gradient_matches([](const Var& x) { return ops::leaky_relu(x, 0.2f); }, x0, 43);
  expect_gradient_matches([](const Var& x) { return ops::max_pool2d(x); }, x0, 44);
  expect_gradient_matches([](const Var& x) { return ops::global_avg_pool(x); }, x0, 45);
  const float scale[] = {2.0f, -1.0f}, shift[] = {0.5f, 0.25f};
  expect_gradient_matches(
      [&](const Var& x) { return ops::channel_affine(x, scale, shift); }, x0, 46);
}

TEST(OpsGradientTest, LinearAndCrossEntropy) {
  Tensor x0 = random_tensor({3, 5}, 50);
  Tensor w0 = random_tensor({4, 5}, 51);
  Tensor b0 = random_tensor({4}, 52);
  expect_gradient_matches([&](const Var& x) { return ops::linear(x, Var(w0), Var(b0)); },
                          x0, 53);
  expect_gradient_matches([&](const Var& w) { return ops::linear(Var(x0), w, Var(b0)); },
                          w0, 54);
  const int labels[] = {0, 3, 1};
  expect_gradient_matches(
      [&](const Var& z) { return ops::cross_entropy(z, labels); },
      random_tensor({3, 4}, 55), 56);
}

TEST(OpsTest, ReflectionPadValues) {
  Var x(Tensor({1, 1, 1, 3}, std::vector<float>{1, 2, 3}));
  EXPECT_THROW(ops::reflection_pad2d(x, 1), ShapeError);
  Var y(Tensor({1, 1, 2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6}));
  Var p = ops::reflection_pad2d(y, 1);
  ASSERT_EQ(p.shape(), (Shape{1, 1, 4, 5}));
  // Row 0 mirrors row 1 of the input: 5 4 5 6 5.
  EXPECT_EQ(std::vector<float>(p.value().data(), p.value().data() + 5),
            (std::vector<float>{5, 4, 5, 6, 5}));
}

TEST(OpsTest, ShapeErrors) {
  Var x(Tensor({1, 3, 4, 4}));
  EXPECT_THROW(ops::conv2d(x, Var(Tensor({2, 2, 3, 3})), Var(), 1, 0), ShapeError);
  EXPECT_THROW(ops::conv2d(x, Var(Tensor({2, 3, 7, 7})), Var(), 1, 0), ShapeError);
  EXPECT_THROW(ops::add(x, Var(Tensor({1, 3, 4, 5}))), ShapeError);
}

TEST(AdamTest, MinimizesQuadratic) {
  Var w(Tensor({2}, std::vector<float>{3.0f, -2.0f}), true);
  Adam opt({{"w", w}}, {0.9, 0.999, 1e-8});
  const Tensor target({2}, std::vector<float>{0.5f, 0.5f});
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    Var diff = make_result(
        Tensor({1}, static_cast<float>((w.value()[0] - 0.5) * (w.value()[0] - 0.5) +
                                       (w.value()[1] - 0.5) * (w.value()[1] - 0.5))),
        {w}, [](Node& self) {
          float* d = self.inputs[0]->grad_buffer().data();
          for (int k = 0; k < 2; ++k) d[k] += 2.0f * (self.inputs[0]->value[k] - 0.5f);
        });
    backward(diff);
    opt.step(0.05);
  }
  EXPECT_NEAR(w.value()[0], 0.5f, 1e-2);
  EXPECT_NEAR(w.value()[1], 0.5f, 1e-2);
  EXPECT_EQ(opt.steps(), 500);
}

TEST(AdamTest, ParameterWithoutGradientIsUntouched) {
  Var a(Tensor({1}, 1.0f), true), b(Tensor({1}, 2.0f), true);
  Adam opt({{"a", a}, {"b", b}});
  a.node()->grad_buffer()[0] = 1.0f;
  opt.step(0.1);
  EXPECT_NE(a.value()[0], 1.0f);
  EXPECT_EQ(b.value()[0], 2.0f);
}

}  // namespace
}  // namespace dstn

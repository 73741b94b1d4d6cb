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
#ifndef DSTN_TESTS_TEST_UTIL_HPP_
#define DSTN_TESTS_TEST_UTIL_HPP_

#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "dstn/autograd.hpp"
#include "dstn/tensor.hpp"

namespace dstn::testing {

inline Tensor random_tensor(const Shape& shape, uint64_t seed, float lo = -1.0f,
                            float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  Tensor t(shape);
  for (float& v : t.values()) v = dist(rng);
  return t;
}

// Scalar probe sum_i r_i * y_i with fixed random r, computed in double.
inline double probe(const Tensor& y, const Tensor& r) {
  double s = 0.0;
  for (int64_t i = 0; i < y.numel(); ++i) s += double(y[i]) * double(r[i]);
  return s;
}

// Compares the autograd gradient of <r, fn(x)> w.r.t. x against central
// differences at a sample of coordinates.
inline void expect_gradient_matches(const std::function<Var(const Var&)>& fn,
                                    Tensor x0, uint64_t seed,
                                    float step = 1e-2f, double tol = 2e-2,
                                    int samples = 40) {
  Var x(x0, true);
  Var y = fn(x);
  const Tensor r = random_tensor(y.shape(), seed + 101);
  // Backprop of the probe: seed the output gradient through a linear node.
  Var probe_out = make_result(Tensor({1}, static_cast<float>(probe(y.value(), r))),
                              {y}, [r](Node& self) {
                                float* d = self.inputs[0]->grad_buffer().data();
                                for (int64_t i = 0; i < r.numel(); ++i) {
                                  d[i] += self.grad[0] * r[i];
                                }
                              });
  backward(probe_out);
  ASSERT_TRUE(x.has_grad());
  const Tensor analytic = x.grad();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int64_t> pick(0, x0.numel() - 1);
  for (int s = 0; s < samples; ++s) {
    const int64_t i = pick(rng);
    Tensor plus = x0, minus = x0;
    plus[i] += step;
    minus[i] -= step;
    double fp, fm;
    {
      NoGradGuard ng;
      fp = probe(fn(Var(plus)).value(), r);
      fm = probe(fn(Var(minus)).value(), r);
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double a = analytic[i];
    EXPECT_NEAR(a, numeric, tol * std::max({1.0, std::abs(a), std::abs(numeric)}))
        << "coordinate " << i;
  }
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("dstn_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace dstn::testing

#endif  // DSTN_TESTS_TEST_UTIL_HPP_

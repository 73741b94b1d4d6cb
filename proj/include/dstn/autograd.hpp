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
#ifndef DSTN_AUTOGRAD_HPP_
#define DSTN_AUTOGRAD_HPP_

#include <functional>
#include <memory>
#include <vector>

#include "dstn/tensor.hpp"

namespace dstn {

struct Node;
using BackwardFn = std::function<void(Node& self)>;

// One vertex of the reverse-mode tape. Leaves (parameters, inputs) have no
// backward function; interior nodes push self.grad into their inputs.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  // Gradient buffer of this node, zero-initialized on first use.
  Tensor& grad_buffer();
};

// Shared handle to a tape node. Copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad() { node_->grad = Tensor(); }

  // Scalar value of a single-element tensor.
  float item() const;

  // Same value, cut from the tape.
  Var detach() const { return Var(node_->value, false); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Whether new ops record backward closures. Thread-local.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Result node of an op. The backward closure is kept only when grad mode is
// on and at least one input requires grad.
Var make_result(Tensor value, std::vector<Var> inputs, BackwardFn backward);

// Reverse sweep from a single-element root. Interior closures are released
// afterwards; leaf gradients accumulate across calls until zero_grad().
void backward(const Var& root);

}  // namespace dstn

#endif  // DSTN_AUTOGRAD_HPP_

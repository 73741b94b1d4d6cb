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
#include "dstn/model.hpp"

#include <algorithm>
#include <string>

#include "dstn/ops.hpp"

namespace dstn {

void GeneratorSpec::validate() const {
  if (base_channels < 1) throw ConfigError("generator base_channels must be >= 1");
  if (n_res_blocks < 1) throw ConfigError("generator n_res_blocks must be >= 1");
  if (n_downsample < 1) throw ConfigError("generator n_downsample must be >= 1");
}

void DiscriminatorSpec::validate() const {
  if (base_channels < 1) {
    throw ConfigError("discriminator base_channels must be >= 1");
  }
  if (n_layers < 1) throw ConfigError("discriminator n_layers must be >= 1");
}

void init_parameters(const ParameterList& params, const GaussianInit& scheme,
                     std::mt19937_64& rng) {
  if (!(scheme.std >= 0.0)) throw ConfigError("init std must be >= 0");
  for (const auto& p : params) {
    Tensor& t = p.var.node()->value;
    if (t.rank() == 1) {
      t.fill(0.0f);
      continue;
    }
    if (scheme.std == 0.0) {
      t.fill(static_cast<float>(scheme.mean));
      continue;
    }
    std::normal_distribution<double> dist(scheme.mean, scheme.std);
    for (float& v : t.values()) v = static_cast<float>(dist(rng));
  }
}

Generator::Conv Generator::make_conv(const std::string& name, int in, int out,
                                     int kernel, int stride, int padding,
                                     bool transposed) {
  Conv c;
  const Shape w_shape = transposed ? Shape{in, out, kernel, kernel}
                                   : Shape{out, in, kernel, kernel};
  c.weight = Var(Tensor(w_shape), true);
  c.bias = Var(Tensor({out}), true);
  c.stride = stride;
  c.padding = padding;
  params_.push_back({name + ".weight", c.weight});
  params_.push_back({name + ".bias", c.bias});
  return c;
}

Generator::Generator(const GeneratorSpec& spec, uint64_t seed, GaussianInit init)
    : spec_(spec) {
  spec_.validate();
  const int base = spec_.base_channels;
  stem_ = make_conv("stem", 3, base, 7, 1, 0);
  int channels = base;
  for (int i = 0; i < spec_.n_downsample; ++i) {
    down_.push_back(make_conv("down" + std::to_string(i), channels,
                              channels * 2, 3, 2, 1));
    channels *= 2;
  }
  for (int i = 0; i < spec_.n_res_blocks; ++i) {
    const std::string name = "res" + std::to_string(i);
    ResidualBlock block;
    block.first = make_conv(name + ".conv1", channels, channels, 3, 1, 0);
    block.second = make_conv(name + ".conv2", channels, channels, 3, 1, 0);
    blocks_.push_back(std::move(block));
  }
  for (int i = 0; i < spec_.n_downsample; ++i) {
    up_.push_back(make_conv("up" + std::to_string(i), channels, channels / 2,
                            3, 2, 1, /*transposed=*/true));
    channels /= 2;
  }
  head_ = make_conv("head", channels, 3, 7, 1, 0);

  std::mt19937_64 rng(seed);
  init_parameters(params_, init, rng);
}

Var Generator::norm(const Var& x) const {
  return spec_.norm == NormKind::kInstance ? ops::instance_norm(x)
                                           : ops::batch_norm(x);
}

Var Generator::forward(const Var& images) const {
  const Shape& s = images.shape();
  if (s.size() != 4 || s[1] != 3) {
    throw ShapeError("generator input must be N x 3 x H x W, got " +
                     shape_string(s));
  }
  const int64_t factor = int64_t{1} << spec_.n_downsample;
  if (s[2] % factor != 0 || s[3] % factor != 0 || s[2] / factor < 2 ||
      s[3] / factor < 2) {
    throw ShapeError("generator input " + shape_string(s) +
                     " must have H, W divisible by " + std::to_string(factor) +
                     " and at least " + std::to_string(2 * factor));
  }
  forwards_->fetch_add(1);

  Var h = ops::reflection_pad2d(images, 3);
  h = ops::relu(norm(ops::conv2d(h, stem_.weight, stem_.bias, 1, 0)));
  for (const Conv& c : down_) {
    h = ops::relu(norm(ops::conv2d(h, c.weight, c.bias, c.stride, c.padding)));
  }
  for (const ResidualBlock& b : blocks_) {
    Var r = ops::reflection_pad2d(h, 1);
    r = ops::relu(norm(ops::conv2d(r, b.first.weight, b.first.bias, 1, 0)));
    r = ops::reflection_pad2d(r, 1);
    r = norm(ops::conv2d(r, b.second.weight, b.second.bias, 1, 0));
    h = ops::add(h, r);
  }
  for (const Conv& c : up_) {
    h = ops::relu(norm(ops::conv_transpose2d(h, c.weight, c.bias, c.stride,
                                             c.padding, /*output_padding=*/1)));
  }
  h = ops::reflection_pad2d(h, 3);
  return ops::tanh(ops::conv2d(h, head_.weight, head_.bias, 1, 0));
}

ImageBatch Generator::operator()(const ImageBatch& batch,
                                 Domain output_domain) const {
  batch.validate();
  NoGradGuard no_grad;
  Var out = forward(Var(batch.data));
  return ImageBatch{out.value(), output_domain, batch.ids};
}

Discriminator::Discriminator(const DiscriminatorSpec& spec, uint64_t seed,
                             GaussianInit init)
    : spec_(spec) {
  spec_.validate();
  const int base = spec_.base_channels;
  auto add = [&](int in, int out, int stride, bool normalized) {
    const std::string name = "layer" + std::to_string(layers_.size());
    Conv c{Var(Tensor({out, in, 4, 4}), true), Var(Tensor({out}), true),
           stride, normalized};
    params_.push_back({name + ".weight", c.weight});
    params_.push_back({name + ".bias", c.bias});
    layers_.push_back(std::move(c));
  };
  add(3, base, 2, false);
  int mult = 1;
  for (int n = 1; n < spec_.n_layers; ++n) {
    const int next = std::min(1 << n, 8);
    add(base * mult, base * next, 2, true);
    mult = next;
  }
  const int last = std::min(1 << spec_.n_layers, 8);
  add(base * mult, base * last, 1, true);
  add(base * last, 1, 1, false);

  std::mt19937_64 rng(seed);
  init_parameters(params_, init, rng);
}

Shape Discriminator::score_shape(const DiscriminatorSpec& spec,
                                 const Shape& input) {
  if (input.size() != 4) {
    throw ShapeError("discriminator input must be rank 4, got " +
                     shape_string(input));
  }
  int64_t h = input[2], w = input[3];
  for (int i = 0; i < spec.n_layers; ++i) {
    h = ops::conv_out_size(h, 4, 2, 1);
    w = ops::conv_out_size(w, 4, 2, 1);
  }
  for (int i = 0; i < 2; ++i) {
    h = ops::conv_out_size(h, 4, 1, 1);
    w = ops::conv_out_size(w, 4, 1, 1);
  }
  if (h <= 0 || w <= 0) {
    throw ShapeError("input " + shape_string(input) +
                     " is smaller than the discriminator's patch footprint");
  }
  return {input[0], 1, h, w};
}

Var Discriminator::forward(const Var& images) const {
  score_shape(spec_, images.shape());
  Var h = images;
  for (size_t i = 0; i < layers_.size(); ++i) {
    const Conv& c = layers_[i];
    h = ops::conv2d(h, c.weight, c.bias, c.stride, 1);
    if (i + 1 == layers_.size()) break;
    if (c.normalized) {
      h = spec_.norm == NormKind::kInstance ? ops::instance_norm(h)
                                            : ops::batch_norm(h);
    }
    h = ops::leaky_relu(h, 0.2f);
  }
  return h;
}

}  // namespace dstn

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
#ifndef DSTN_MODEL_HPP_
#define DSTN_MODEL_HPP_

#include <atomic>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "dstn/autograd.hpp"
#include "dstn/image_batch.hpp"
#include "dstn/optim.hpp"

namespace dstn {

enum class NormKind { kInstance, kBatch };

struct GeneratorSpec {
  int base_channels = 64;
  int n_res_blocks = 9;
  int n_downsample = 2;
  NormKind norm = NormKind::kInstance;

  void validate() const;
  bool operator==(const GeneratorSpec&) const = default;
};

struct DiscriminatorSpec {
  int base_channels = 64;
  int n_layers = 3;
  NormKind norm = NormKind::kInstance;

  void validate() const;
  bool operator==(const DiscriminatorSpec&) const = default;
};

struct GaussianInit {
  double mean = 0.0;
  double std = 0.02;

  bool operator==(const GaussianInit&) const = default;
};

// Draws every convolution/linear weight i.i.d. from the scheme; biases are
// set to zero. Parameters are visited in list order, so a given rng state
// always yields the same values.
void init_parameters(const ParameterList& params, const GaussianInit& scheme,
                     std::mt19937_64& rng);

/// Residual encoder-decoder image generator:
///   7x7 stem -> n_downsample stride-2 convs -> n_res_blocks residual blocks
///   -> n_downsample stride-1/2 transposed convs -> 7x7 head -> tanh.
/// Borders are reflection-padded, so output H x W equals input H x W whenever
/// both are divisible by 2^n_downsample.
class Generator {
 public:
  Generator(const GeneratorSpec& spec, uint64_t seed, GaussianInit init = {});

  Var forward(const Var& images) const;
  // Gradient-free inference on a validated batch.
  ImageBatch operator()(const ImageBatch& batch, Domain output_domain) const;

  const GeneratorSpec& spec() const { return spec_; }
  const ParameterList& parameters() const { return params_; }
  int64_t forward_count() const { return forwards_->load(); }

 private:
  struct Conv {
    Var weight;
    Var bias;
    int stride = 1;
    int padding = 0;
  };
  struct ResidualBlock {
    Conv first;
    Conv second;
  };

  Conv make_conv(const std::string& name, int in, int out, int kernel,
                 int stride, int padding, bool transposed = false);
  Var norm(const Var& x) const;

  GeneratorSpec spec_;
  ParameterList params_;
  Conv stem_;
  std::vector<Conv> down_;
  std::vector<ResidualBlock> blocks_;
  std::vector<Conv> up_;
  Conv head_;
  std::unique_ptr<std::atomic<int64_t>> forwards_ =
      std::make_unique<std::atomic<int64_t>>(0);
};

/// PatchGAN discriminator: n_layers stride-2 4x4 convs followed by two
/// stride-1 4x4 convs, emitting an unsquashed N x 1 x h' x w' score map.
class Discriminator {
 public:
  Discriminator(const DiscriminatorSpec& spec, uint64_t seed,
                GaussianInit init = {});

  // Throws ShapeError when the input is smaller than the patch footprint.
  Var forward(const Var& images) const;

  // Score-map shape for an N x C x H x W input; throws ShapeError when empty.
  static Shape score_shape(const DiscriminatorSpec& spec, const Shape& input);

  const DiscriminatorSpec& spec() const { return spec_; }
  const ParameterList& parameters() const { return params_; }

 private:
  struct Conv {
    Var weight;
    Var bias;
    int stride = 1;
    bool normalized = false;
  };

  DiscriminatorSpec spec_;
  ParameterList params_;
  std::vector<Conv> layers_;
};

}  // namespace dstn

#endif  // DSTN_MODEL_HPP_

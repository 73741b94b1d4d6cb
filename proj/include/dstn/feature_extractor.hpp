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
#ifndef DSTN_FEATURE_EXTRACTOR_HPP_
#define DSTN_FEATURE_EXTRACTOR_HPP_

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "dstn/autograd.hpp"
#include "dstn/image_batch.hpp"
#include "dstn/optim.hpp"

namespace dstn {

struct FeatureExtractorSpec {
  std::string backbone = "vgg16";
  // Tap point, e.g. relu2_2.
  std::string layer = "relu2_2";
  std::filesystem::path weights_path;

  bool operator==(const FeatureExtractorSpec&) const = default;
};

/// Frozen VGG-16 prefix ending at a relu tap. Weights come from a tensor
/// archive holding conv{block}_{index}.weight / .bias entries; layer widths
/// are taken from the file. Inputs in [-1, 1] are mapped to the backbone's
/// native statistics (stored in the archive metadata, ImageNet by default).
class FeatureExtractor {
 public:
  // Throws LoadError for a missing/corrupt file or missing tap layers,
  // ConfigError for an unknown backbone or tap.
  static FeatureExtractor load(const FeatureExtractorSpec& spec);

  // Differentiable w.r.t. the input only; parameters never receive gradients.
  Var forward(const Var& images) const;
  Tensor extract(const ImageBatch& batch) const;
  // Global-average-pooled tap activations, one row per image: [N, C].
  Tensor embed(const Tensor& images) const;

  const FeatureExtractorSpec& spec() const { return spec_; }
  // Payload checksum of the weights file.
  const std::string& checksum() const { return checksum_; }
  int64_t output_channels() const;
  int64_t invocations() const { return invocations_->load(); }
  const ParameterList& parameters() const { return params_; }

 private:
  struct Layer {
    enum Kind { kConvRelu, kPool } kind;
    Var weight;
    Var bias;
  };

  FeatureExtractorSpec spec_;
  std::string checksum_;
  ParameterList params_;
  std::vector<Layer> layers_;
  std::vector<float> scale_;
  std::vector<float> shift_;
  std::shared_ptr<std::atomic<int64_t>> invocations_ =
      std::make_shared<std::atomic<int64_t>>(0);
};

// Layer names of the VGG-16 feature stack up to and including the tap, e.g.
// {"conv1_1", "conv1_2", "pool1", "conv2_1", "conv2_2"} for relu2_2.
std::vector<std::string> vgg16_layers_through(const std::string& tap);

/// Writes a seeded, He-initialized VGG-16 prefix through `tap` whose block
/// widths are `widths` (64, 128, 256, 512, 512 for the real network). The
/// archive metadata marks it as a stand-in; it is meant for tests and
/// offline smoke runs when pretrained weights are unavailable.
void write_standin_vgg16(const std::filesystem::path& path, uint64_t seed,
                         const std::string& tap = "relu2_2",
                         std::vector<int> widths = {64, 128, 256, 512, 512});

}  // namespace dstn

#endif  // DSTN_FEATURE_EXTRACTOR_HPP_

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
#include "dstn/feature_extractor.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

#include "dstn/ops.hpp"
#include "dstn/serialize.hpp"

namespace dstn {

namespace {

constexpr int kBlockDepth[5] = {2, 2, 3, 3, 3};

// Parses "relu<block>_<index>".
std::pair<int, int> parse_tap(const std::string& tap) {
  int block = 0, index = 0;
  if (std::sscanf(tap.c_str(), "relu%d_%d", &block, &index) != 2 ||
      block < 1 || block > 5 || index < 1 || index > kBlockDepth[block - 1] ||
      tap != "relu" + std::to_string(block) + "_" + std::to_string(index)) {
    throw ConfigError("unknown VGG-16 tap '" + tap + "'");
  }
  return {block, index};
}

}  // namespace

std::vector<std::string> vgg16_layers_through(const std::string& tap) {
  const auto [last_block, last_index] = parse_tap(tap);
  std::vector<std::string> names;
  for (int b = 1; b <= last_block; ++b) {
    if (b > 1) names.push_back("pool" + std::to_string(b - 1));
    const int depth = b == last_block ? last_index : kBlockDepth[b - 1];
    for (int i = 1; i <= depth; ++i) {
      names.push_back("conv" + std::to_string(b) + "_" + std::to_string(i));
    }
  }
  return names;
}

FeatureExtractor FeatureExtractor::load(const FeatureExtractorSpec& spec) {
  if (spec.backbone != "vgg16") {
    throw ConfigError("unsupported feature backbone '" + spec.backbone + "'");
  }
  const auto names = vgg16_layers_through(spec.layer);
  if (spec.weights_path.empty()) {
    throw LoadError("content_extractor.weights_path is not set");
  }
  if (!std::filesystem::exists(spec.weights_path)) {
    throw LoadError("feature extractor weights not found: " +
                    spec.weights_path.string());
  }
  FeatureExtractor fx;
  fx.spec_ = spec;
  TensorArchive archive = load_archive(spec.weights_path, &fx.checksum_);

  const auto meta = nlohmann::json::parse(archive.metadata_json, nullptr, false);
  std::vector<float> mean{0.485f, 0.456f, 0.406f};
  std::vector<float> stdev{0.229f, 0.224f, 0.225f};
  if (meta.is_object()) {
    if (meta.contains("mean")) mean = meta["mean"].get<std::vector<float>>();
    if (meta.contains("std")) stdev = meta["std"].get<std::vector<float>>();
  }
  if (mean.size() != 3 || stdev.size() != 3) {
    throw LoadError("extractor metadata mean/std must have 3 entries");
  }
  // x in [-1, 1] -> ((x + 1) / 2 - mean) / std
  for (int c = 0; c < 3; ++c) {
    fx.scale_.push_back(0.5f / stdev[c]);
    fx.shift_.push_back((0.5f - mean[c]) / stdev[c]);
  }

  int64_t channels = 3;
  for (const std::string& name : names) {
    if (name.starts_with("pool")) {
      fx.layers_.push_back({Layer::kPool, Var(), Var()});
      continue;
    }
    auto w = archive.tensors.find(name + ".weight");
    auto b = archive.tensors.find(name + ".bias");
    if (w == archive.tensors.end() || b == archive.tensors.end()) {
      throw LoadError(spec.weights_path.string() + ": missing layer " + name +
                      " needed for tap " + spec.layer);
    }
    const Shape& ws = w->second.shape();
    if (ws.size() != 4 || ws[1] != channels || ws[2] != 3 || ws[3] != 3 ||
        b->second.shape() != Shape{ws[0]}) {
      throw LoadError(spec.weights_path.string() + ": layer " + name +
                      " has incompatible shape " + shape_string(ws));
    }
    channels = ws[0];
    Layer layer{Layer::kConvRelu, Var(w->second, false), Var(b->second, false)};
    fx.params_.push_back({name + ".weight", layer.weight});
    fx.params_.push_back({name + ".bias", layer.bias});
    fx.layers_.push_back(std::move(layer));
  }
  return fx;
}

int64_t FeatureExtractor::output_channels() const {
  return params_.empty() ? 3 : params_[params_.size() - 2].var.shape()[0];
}

Var FeatureExtractor::forward(const Var& images) const {
  const Shape& s = images.shape();
  if (s.size() != 4 || s[1] != 3) {
    throw ShapeError("feature extractor input must be N x 3 x H x W, got " +
                     shape_string(s));
  }
  invocations_->fetch_add(1);
  Var h = ops::channel_affine(images, scale_, shift_);
  for (const Layer& layer : layers_) {
    if (layer.kind == Layer::kPool) {
      h = ops::max_pool2d(h);
    } else {
      h = ops::relu(ops::conv2d(h, layer.weight, layer.bias, 1, 1));
    }
  }
  return h;
}

Tensor FeatureExtractor::extract(const ImageBatch& batch) const {
  batch.validate();
  NoGradGuard no_grad;
  return forward(Var(batch.data)).value();
}

Tensor FeatureExtractor::embed(const Tensor& images) const {
  NoGradGuard no_grad;
  return ops::global_avg_pool(forward(Var(images))).value();
}

void write_standin_vgg16(const std::filesystem::path& path, uint64_t seed,
                         const std::string& tap, std::vector<int> widths) {
  if (widths.size() != 5) throw ConfigError("VGG-16 needs 5 block widths");
  std::mt19937_64 rng(seed);
  TensorArchive archive;
  int64_t channels = 3;
  for (const std::string& name : vgg16_layers_through(tap)) {
    if (name.starts_with("pool")) continue;
    const int block = name[4] - '0';
    const int64_t out = widths[block - 1];
    Tensor w({out, channels, 3, 3});
    std::normal_distribution<double> dist(
        0.0, std::sqrt(2.0 / static_cast<double>(channels * 9)));
    for (float& v : w.values()) v = static_cast<float>(dist(rng));
    archive.tensors.emplace(name + ".weight", std::move(w));
    archive.tensors.emplace(name + ".bias", Tensor({out}));
    channels = out;
  }
  nlohmann::json meta = {{"backbone", "vgg16"},
                         {"standin", true},
                         {"seed", seed},
                         {"tap", tap},
                         {"mean", {0.485, 0.456, 0.406}},
                         {"std", {0.229, 0.224, 0.225}}};
  archive.metadata_json = meta.dump();
  save_archive(path, archive);
}

}  // namespace dstn

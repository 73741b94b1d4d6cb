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
#ifndef DSTN_TRAINER_HPP_
#define DSTN_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dstn/data.hpp"
#include "dstn/feature_extractor.hpp"
#include "dstn/image_batch.hpp"
#include "dstn/losses.hpp"
#include "dstn/model.hpp"
#include "dstn/optim.hpp"

namespace dstn {

struct TrainConfig {
  LossWeights weights;
  AdversarialVariant adv_variant = AdversarialVariant::kLeastSquares;
  int epochs_constant = 100;
  int epochs_decay = 100;
  double base_lr = 2e-4;
  int batch_size = 1;
  int pool_capacity = 50;
  uint64_t seed = 0;
  // 0 writes only the final checkpoint.
  int checkpoint_every = 0;

  GeneratorSpec generator;
  DiscriminatorSpec discriminator;
  FeatureExtractorSpec content_extractor;
  GaussianInit init;
  AdamOptions adam;
  int image_size = 256;
  CropMode crop = CropMode::kRandom;
  bool flip = false;
  // Lenient loading skips undecodable images with a log line.
  bool strict_data = true;

  int total_epochs() const { return epochs_constant + epochs_decay; }
  PreprocessSpec preprocess() const;
  void validate() const;

  // Missing keys keep their defaults; unknown keys are a ConfigError.
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  bool operator==(const TrainConfig&) const = default;
};

std::string adv_variant_name(AdversarialVariant v);  // "nll" | "least_squares"
AdversarialVariant parse_adv_variant(const std::string& name);  // also "lsgan"

// Learning rate for a zero-based epoch: constant, then linear decay to 0.
double lr_at_epoch(const TrainConfig& config, int epoch);

/// Bounded replay store of generated images (each 3 x H x W).
class ImagePool {
 public:
  explicit ImagePool(int capacity = 0);

  // Fill phase stores and returns the input. Once full, returns either the
  // input or a stored image (which the input then replaces), each with
  // probability 1/2. *swapped reports which.
  Tensor query(const Tensor& image, std::mt19937_64& rng,
               bool* swapped = nullptr);
  // Per-image query over an N x 3 x H x W batch.
  Tensor query_batch(const Tensor& images, std::mt19937_64& rng);

  int capacity() const { return capacity_; }
  size_t size() const { return buffer_.size(); }
  const std::vector<Tensor>& buffer() const { return buffer_; }
  void restore(std::vector<Tensor> buffer);

 private:
  int capacity_;
  std::vector<Tensor> buffer_;
};

Tensor pool_query(ImagePool& pool, const Tensor& image, std::mt19937_64& rng);

// Work actually performed, for ablation checks. Not checkpointed.
struct StepCounters {
  int64_t identity_forwards = 0;
  int64_t cycle_forwards = 0;
  int64_t content_terms = 0;
};

/// Everything that evolves during training. G maps X -> Y and D_y judges
/// domain Y; F maps Y -> X and D_x judges domain X. pool_y replays G's
/// outputs, pool_x replays F's.
struct TrainState {
  Generator g;
  Generator f;
  Discriminator d_x;
  Discriminator d_y;
  Adam opt_generators;
  Adam opt_dx;
  Adam opt_dy;
  int epoch = 0;
  int64_t step = 0;
  std::mt19937_64 rng;
  ImagePool pool_x;
  ImagePool pool_y;
  std::vector<LossReport> history;
  StepCounters counters;

  // Fresh networks seeded from config.seed.
  static std::unique_ptr<TrainState> create(const TrainConfig& config);

  ParameterList generator_parameters() const;
  ParameterList discriminator_parameters() const;

 private:
  TrainState(const TrainConfig& config);
};

// Detached generator outputs from the generator phase, fed to the
// discriminator phase.
struct GeneratedImages {
  Tensor fake_y;  // G(x)
  Tensor fake_x;  // F(y)
};

// Phase 1: joint G/F update. Discriminator parameters are not modified.
// Fills the generator-side fields of *report.
GeneratedImages update_generators(TrainState& state, const ImageBatch& x,
                                  const ImageBatch& y, const TrainConfig& config,
                                  double lr, const FeatureExtractor* extractor,
                                  LossReport* report);

// Phase 2: D_y on (y, pooled G(x)), then D_x on (x, pooled F(y)). Generator
// parameters are not modified.
void update_discriminators(TrainState& state, const ImageBatch& x, const ImageBatch& y,
                           const GeneratedImages& fakes, const TrainConfig& config,
                           double lr, LossReport* report);

/// One alternating update: G and F jointly, then D_y on pooled G(x), then D_x
/// on pooled F(y). Terms whose weight is 0 are not computed at all. The
/// extractor is required only when gamma > 0. Throws NonFiniteError naming the
/// first non-finite loss term or parameter.
LossReport train_step(TrainState& state, const ImageBatch& x, const ImageBatch& y,
                      const TrainConfig& config, double lr,
                      const FeatureExtractor* extractor = nullptr);

// Key/value view of a report, in a fixed order. Used for logs and tests.
nlohmann::json report_to_json(const LossReport& r);

inline constexpr std::string_view kCheckpointMagic = "DSTNCKPT";
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  std::unique_ptr<TrainState> state;
  std::string extractor_checksum;
  // Non-fatal findings such as an extractor checksum mismatch.
  std::vector<std::string> warnings;
};

void save_checkpoint(const TrainState& state, const TrainConfig& config,
                     const std::string& extractor_checksum,
                     const std::filesystem::path& path);

// Throws CheckpointError on version mismatch, corruption or truncation.
// When expected_extractor_checksum is set and differs from the recorded one,
// a warning is added instead of failing.
Checkpoint load_checkpoint(
    const std::filesystem::path& path,
    const std::optional<std::string>& expected_extractor_checksum = {});

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int epoch);

struct FitOptions {
  // Checkpoints and metrics.jsonl go here. Empty disables both.
  std::filesystem::path out_dir;
  std::function<void(int epoch, const LossReport& mean)> on_epoch;
  std::function<void(int epoch, const LossReport& report)> on_step;
};

/// Trains from state.epoch up to config.total_epochs(). Resumed states
/// continue the same data order, pool and schedule. Returns written
/// checkpoint paths.
std::vector<std::filesystem::path> fit(TrainState& state, const TrainConfig& config,
                                       const DatasetManifest& manifest,
                                       const FeatureExtractor* extractor,
                                       const FitOptions& options = {});

}  // namespace dstn

#endif  // DSTN_TRAINER_HPP_

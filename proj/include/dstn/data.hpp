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
#ifndef DSTN_DATA_HPP_
#define DSTN_DATA_HPP_

#include <nlohmann/json.hpp>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dstn/image_batch.hpp"
#include "dstn/image_io.hpp"

namespace dstn {

enum class Split { kTrain, kTest };
std::string_view split_name(Split s);
Split parse_split(std::string_view name);

// Unpaired two-domain file lists for one split. Paths are absolute-or-as-given
// and sorted lexicographically within each domain.
struct DatasetManifest {
  std::filesystem::path root;
  Split split = Split::kTrain;
  std::vector<std::filesystem::path> domain_x;
  std::vector<std::filesystem::path> domain_y;

  size_t count_x() const { return domain_x.size(); }
  size_t count_y() const { return domain_y.size(); }

  // Both lists non-empty and disjoint.
  void validate() const;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
};

// Reads <root>/<split>/X and <root>/<split>/Y (png/jpg/jpeg files only).
// Throws LoadError naming a missing directory or an empty domain.
DatasetManifest load_manifest(const std::filesystem::path& root, Split split);

// Sorted image files directly inside `dir`.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

enum class CropMode { kNone, kCenter, kRandom };

struct PreprocessSpec {
  int out_size = 256;
  // kNone: resize straight to out_size x out_size.
  // kCenter: resize the short side to out_size, take the central square.
  // kRandom: resize to ceil(random_crop_scale * out_size) square, random crop.
  CropMode crop = CropMode::kNone;
  double random_crop_scale = 1.07;
  bool flip = false;

  void validate() const;
  static PreprocessSpec train(int out_size = 256) {
    return {out_size, CropMode::kRandom, 1.07, false};
  }
  static PreprocessSpec test(int out_size = 256) {
    return {out_size, CropMode::kNone, 1.07, false};
  }
  bool operator==(const PreprocessSpec&) const = default;
};

// Raster (1, 3 or 4 channels; gray replicated, alpha dropped) ->
// 3 x out_size x out_size in [-1, 1]. Random crop and flip consume rng.
Tensor preprocess(const Raster& image, const PreprocessSpec& spec,
                  std::mt19937_64& rng);

// Decoded and preprocessed batch from files; ids are the given id strings.
// With strict == false undecodable files are logged and left out.
ImageBatch load_batch(const std::vector<std::filesystem::path>& files,
                      const std::vector<std::string>& ids, Domain domain,
                      const PreprocessSpec& spec, std::mt19937_64& rng,
                      bool strict = true);

// Index schedule for one epoch: every X index exactly once in shuffled order,
// cut into batches of batch_size (last batch may be short). Y indices are a
// permutation when |Y| == |X|, otherwise drawn uniformly with replacement.
struct EpochPlan {
  std::vector<std::vector<size_t>> x_batches;
  std::vector<std::vector<size_t>> y_batches;
};

EpochPlan plan_epoch(size_t count_x, size_t count_y, int batch_size,
                     std::mt19937_64& rng);

struct UnpairedBatch {
  ImageBatch x;
  ImageBatch y;
  std::vector<size_t> x_indices;
  std::vector<size_t> y_indices;
};

/// Walks a train manifest one X-driven epoch at a time. Both the epoch plan
/// and the per-image augmentation draw from the caller's rng, so a fixed seed
/// replays the same stream.
class UnpairedSampler {
 public:
  UnpairedSampler(DatasetManifest manifest, int batch_size, PreprocessSpec spec,
                  bool strict = true);

  void begin_epoch(std::mt19937_64& rng);
  // False once the epoch is exhausted.
  bool next(std::mt19937_64& rng, UnpairedBatch& out);
  size_t batches_per_epoch() const;

  const DatasetManifest& manifest() const { return manifest_; }

 private:
  std::string id_of(const std::filesystem::path& p) const;

  DatasetManifest manifest_;
  int batch_size_;
  PreprocessSpec spec_;
  bool strict_;
  EpochPlan plan_;
  size_t cursor_ = 0;
};

// Convenience form: one (X, Y) batch pair drawn from a fresh epoch plan.
std::pair<ImageBatch, ImageBatch> sample_unpaired(const DatasetManifest& manifest,
                                                  int batch_size,
                                                  const PreprocessSpec& spec,
                                                  std::mt19937_64& rng);

}  // namespace dstn

#endif  // DSTN_DATA_HPP_

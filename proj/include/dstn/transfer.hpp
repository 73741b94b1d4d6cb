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
#ifndef DSTN_TRANSFER_HPP_
#define DSTN_TRANSFER_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dstn/feature_extractor.hpp"
#include "dstn/model.hpp"
#include "dstn/tensor.hpp"

namespace dstn {

// G maps paintings (X) to photos (Y); F maps back.
enum class Direction { kG, kF };

Direction parse_direction(const std::string& s);  // "G" | "F"

struct TransferRequest {
  std::filesystem::path checkpoint;
  Direction direction = Direction::kG;
  // A single image or a directory of images (not recursive).
  std::filesystem::path inputs;
  std::filesystem::path out_dir;
  int out_size = 256;
  // Lenient mode logs and skips undecodable inputs.
  bool strict = true;
};

// Image files named by a request's `inputs`, sorted. Throws LoadError when
// the path is missing or holds no images.
std::vector<std::filesystem::path> collect_inputs(const std::filesystem::path& inputs);

// Output path for an input: <out_dir>/<stem>_transferred.png.
std::filesystem::path transferred_path(const std::filesystem::path& out_dir,
                                       const std::filesystem::path& input);

/// Runs `generator` over each file and writes one PNG per input (atomic per
/// file). Returns the written paths in input order.
std::vector<std::filesystem::path> transfer_files(
    const Generator& generator, const std::vector<std::filesystem::path>& files,
    const std::filesystem::path& out_dir, int out_size, bool strict = true);

// Loads the checkpoint and transfers with the requested generator.
std::vector<std::filesystem::path> transfer(const TransferRequest& request);

struct Neighbor {
  std::string id;
  double similarity = 0.0;
};

struct NeighborResult {
  std::string query_id;
  int k = 0;
  std::vector<Neighbor> ranked;

  nlohmann::json to_json() const;
};

// Cosine similarity in double precision; 0 when either vector is zero.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// Exact top-k over embeddings: gallery is [M, D], query has D entries.
/// Ties are broken by gallery id ascending. Throws ConfigError when
/// k < 1 or k > M.
NeighborResult rank_neighbors(const std::string& query_id, std::span<const float> query,
                              const std::vector<std::string>& gallery_ids,
                              const Tensor& gallery, int k);

/// Embeds the query image and every image in gallery_dir with the extractor
/// (global average pooling of its tap) and ranks them.
NeighborResult nearest_neighbors(const std::filesystem::path& query_image,
                                 const std::filesystem::path& gallery_dir, int k,
                                 const FeatureExtractor& embedder, int image_size = 256);

}  // namespace dstn

#endif  // DSTN_TRANSFER_HPP_

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
#include "dstn/transfer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "dstn/data.hpp"
#include "dstn/errors.hpp"
#include "dstn/image_io.hpp"
#include "dstn/trainer.hpp"

namespace dstn {

namespace fs = std::filesystem;

Direction parse_direction(const std::string& s) {
  if (s == "G" || s == "g") return Direction::kG;
  if (s == "F" || s == "f") return Direction::kF;
  throw ConfigError("direction must be G (X->Y) or F (Y->X), got '" + s + "'");
}

std::vector<fs::path> collect_inputs(const fs::path& inputs) {
  if (fs::is_regular_file(inputs)) return {inputs};
  if (!fs::is_directory(inputs)) throw LoadError("no such input: " + inputs.string());
  std::vector<fs::path> files = list_images(inputs);
  if (files.empty()) throw LoadError("no images in " + inputs.string());
  return files;
}

fs::path transferred_path(const fs::path& out_dir, const fs::path& input) {
  return out_dir / (input.stem().string() + "_transferred.png");
}

std::vector<fs::path> transfer_files(const Generator& generator,
                                     const std::vector<fs::path>& files,
                                     const fs::path& out_dir, int out_size, bool strict) {
  if (files.empty()) throw ConfigError("transfer needs at least one input");
  std::map<fs::path, fs::path> claimed;
  for (const auto& f : files) {
    const fs::path out = transferred_path(out_dir, f);
    auto [it, fresh] = claimed.emplace(out, f);
    if (!fresh) {
      throw ConfigError("inputs " + it->second.string() + " and " + f.string() +
                        " would both write " + out.string());
    }
  }
  const PreprocessSpec spec = PreprocessSpec::test(out_size);
  spec.validate();
  fs::create_directories(out_dir);
  std::mt19937_64 unused_rng(0);  // deterministic preprocessing draws nothing
  std::vector<fs::path> written;
  for (const auto& f : files) {
    Tensor chw;
    try {
      chw = preprocess(decode_image(f), spec, unused_rng);
    } catch (const LoadError& e) {
      if (strict) throw;
      spdlog::warn("skipping {}: {}", f.string(), e.what());
      continue;
    }
    ImageBatch in{chw.reshaped({1, 3, out_size, out_size}), Domain::kPaintings,
                  {f.filename().string()}};
    const ImageBatch out = generator(in, Domain::kNatural);
    const fs::path dst = transferred_path(out_dir, f);
    write_png(dst, denormalize(out.data.reshaped({3, out_size, out_size})));
    written.push_back(dst);
  }
  return written;
}

std::vector<fs::path> transfer(const TransferRequest& request) {
  if (!fs::exists(request.checkpoint)) {
    throw CheckpointError("checkpoint not found: " + request.checkpoint.string());
  }
  const std::vector<fs::path> files = collect_inputs(request.inputs);
  const Checkpoint ck = load_checkpoint(request.checkpoint);
  const Generator& gen = request.direction == Direction::kG ? ck.state->g : ck.state->f;
  return transfer_files(gen, files, request.out_dir, request.out_size, request.strict);
}

nlohmann::json NeighborResult::to_json() const {
  nlohmann::json ranked_json = nlohmann::json::array();
  for (const auto& n : ranked) {
    ranked_json.push_back({{"id", n.id}, {"similarity", n.similarity}});
  }
  return {{"query", query_id}, {"k", k}, {"neighbors", ranked_json}};
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine_similarity: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * double(b[i]);
    na += double(a[i]) * double(a[i]);
    nb += double(b[i]) * double(b[i]);
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  // One rounding per step, so equal ratios dot^2 / (na nb) give bitwise
  // equal similarities and ties stay ties.
  const double c2 = std::min(dot * dot / (na * nb), 1.0);
  return std::copysign(std::sqrt(c2), dot);
}

NeighborResult rank_neighbors(const std::string& query_id, std::span<const float> query,
                              const std::vector<std::string>& gallery_ids,
                              const Tensor& gallery, int k) {
  if (gallery.rank() != 2) {
    throw ShapeError("gallery embeddings must be [M, D], got " +
                     shape_string(gallery.shape()));
  }
  const int64_t m = gallery.dim(0), d = gallery.dim(1);
  if (static_cast<int64_t>(gallery_ids.size()) != m) {
    throw ShapeError("gallery has " + std::to_string(m) + " embeddings but " +
                     std::to_string(gallery_ids.size()) + " ids");
  }
  if (static_cast<int64_t>(query.size()) != d) {
    throw ShapeError("query embedding has " + std::to_string(query.size()) +
                     " entries, gallery has " + std::to_string(d));
  }
  if (m == 0) throw ConfigError("gallery is empty");
  if (k < 1 || k > m) {
    throw ConfigError("k = " + std::to_string(k) + " must lie in [1, " + std::to_string(m) +
                      "]");
  }
  std::vector<Neighbor> all(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i) {
    all[i] = {gallery_ids[i],
              cosine_similarity(query, std::span<const float>(gallery.data() + i * d,
                                                              static_cast<size_t>(d)))};
  }
  auto before = [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  };
  std::partial_sort(all.begin(), all.begin() + k, all.end(), before);
  all.resize(static_cast<size_t>(k));
  return {query_id, k, std::move(all)};
}

namespace {

// [N, C] embeddings for image files, in small batches.
Tensor embed_files(const FeatureExtractor& embedder, const std::vector<fs::path>& files,
                   int image_size) {
  const PreprocessSpec spec = PreprocessSpec::test(image_size);
  std::mt19937_64 unused_rng(0);
  const int64_t per = 3LL * image_size * image_size;
  constexpr size_t kChunk = 8;
  Tensor out;
  int64_t channels = 0;
  for (size_t start = 0; start < files.size(); start += kChunk) {
    const size_t n = std::min(kChunk, files.size() - start);
    Tensor batch({static_cast<int64_t>(n), 3, image_size, image_size});
    for (size_t i = 0; i < n; ++i) {
      const Tensor chw = preprocess(decode_image(files[start + i]), spec, unused_rng);
      std::copy_n(chw.data(), per, batch.data() + i * per);
    }
    const Tensor e = embedder.embed(batch);
    if (out.empty()) {
      channels = e.dim(1);
      out = Tensor({static_cast<int64_t>(files.size()), channels});
    }
    std::copy_n(e.data(), e.numel(), out.data() + start * channels);
  }
  return out;
}

}  // namespace

NeighborResult nearest_neighbors(const fs::path& query_image, const fs::path& gallery_dir,
                                 int k, const FeatureExtractor& embedder, int image_size) {
  const std::vector<fs::path> gallery_files = list_images(gallery_dir);
  if (gallery_files.empty()) throw LoadError("gallery " + gallery_dir.string() + " is empty");
  if (k < 1 || k > static_cast<int>(gallery_files.size())) {
    throw ConfigError("k = " + std::to_string(k) + " exceeds gallery size " +
                      std::to_string(gallery_files.size()));
  }
  std::vector<std::string> ids;
  for (const auto& f : gallery_files) ids.push_back(f.lexically_relative(gallery_dir).string());
  const Tensor gallery = embed_files(embedder, gallery_files, image_size);
  const Tensor query = embed_files(embedder, {query_image}, image_size);
  return rank_neighbors(query_image.filename().string(), query.values(), ids, gallery, k);
}

}  // namespace dstn

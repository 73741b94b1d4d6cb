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
#include "dstn/data.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace dstn {

namespace fs = std::filesystem;

std::string_view split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LoadError("missing directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && has_image_extension(entry.path())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

void DatasetManifest::validate() const {
  if (domain_x.empty()) throw LoadError("manifest has no X images");
  if (domain_y.empty()) throw LoadError("manifest has no Y images");
  std::set<fs::path> seen(domain_x.begin(), domain_x.end());
  for (const auto& p : domain_y) {
    if (seen.contains(p)) {
      throw LoadError("path appears in both domains: " + p.string());
    }
  }
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json j;
  j["root"] = root.string();
  j["split"] = std::string(split_name(split));
  auto strings = [](const std::vector<fs::path>& v) {
    std::vector<std::string> s;
    for (const auto& p : v) s.push_back(p.string());
    return s;
  };
  j["domain_x"] = strings(domain_x);
  j["domain_y"] = strings(domain_y);
  j["counts"] = {{"X", domain_x.size()}, {"Y", domain_y.size()}};
  return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.root = j.at("root").get<std::string>();
  m.split = parse_split(j.at("split").get<std::string>());
  for (const auto& s : j.at("domain_x")) m.domain_x.emplace_back(s.get<std::string>());
  for (const auto& s : j.at("domain_y")) m.domain_y.emplace_back(s.get<std::string>());
  if (j.contains("counts")) {
    const auto& c = j["counts"];
    if (c.at("X").get<size_t>() != m.domain_x.size() ||
        c.at("Y").get<size_t>() != m.domain_y.size()) {
      throw LoadError("manifest counts do not match list lengths");
    }
  }
  m.validate();
  return m;
}

DatasetManifest load_manifest(const fs::path& root, Split split) {
  DatasetManifest m;
  m.root = root;
  m.split = split;
  const fs::path base = root / split_name(split);
  m.domain_x = list_images(base / "X");
  m.domain_y = list_images(base / "Y");
  if (m.domain_x.empty()) throw LoadError("no images in " + (base / "X").string());
  if (m.domain_y.empty()) throw LoadError("no images in " + (base / "Y").string());
  m.validate();
  return m;
}

void PreprocessSpec::validate() const {
  if (out_size < 4 || out_size % 4 != 0) {
    throw ConfigError("out_size must be a positive multiple of 4, got " +
                      std::to_string(out_size));
  }
  if (!(random_crop_scale >= 1.0)) throw ConfigError("random_crop_scale must be >= 1");
}

namespace {

cv::Mat to_rgb_mat(const Raster& image) {
  if (image.width < 1 || image.height < 1) throw ShapeError("empty image");
  int type = 0;
  switch (image.channels) {
    case 1: type = CV_8UC1; break;
    case 3: type = CV_8UC3; break;
    case 4: type = CV_8UC4; break;
    default:
      throw ShapeError("images must have 1, 3 or 4 channels, got " +
                       std::to_string(image.channels));
  }
  cv::Mat m(image.height, image.width, type, const_cast<uint8_t*>(image.pixels.data()));
  cv::Mat rgb;
  if (image.channels == 1) {
    cv::cvtColor(m, rgb, cv::COLOR_GRAY2RGB);
  } else if (image.channels == 4) {
    cv::cvtColor(m, rgb, cv::COLOR_RGBA2RGB);
  } else {
    rgb = m.clone();
  }
  return rgb;
}

cv::Mat resize_to(const cv::Mat& m, int width, int height) {
  if (m.cols == width && m.rows == height) return m;
  const bool shrinking = width < m.cols && height < m.rows;
  cv::Mat out;
  cv::resize(m, out, cv::Size(width, height), 0, 0,
             shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  return out;
}

}  // namespace

Tensor preprocess(const Raster& image, const PreprocessSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const int size = spec.out_size;
  cv::Mat rgb = to_rgb_mat(image);
  cv::Mat out;
  switch (spec.crop) {
    case CropMode::kNone:
      out = resize_to(rgb, size, size);
      break;
    case CropMode::kCenter: {
      const double scale = static_cast<double>(size) / std::min(rgb.cols, rgb.rows);
      const int w = std::max(size, static_cast<int>(std::lround(rgb.cols * scale)));
      const int h = std::max(size, static_cast<int>(std::lround(rgb.rows * scale)));
      cv::Mat r = resize_to(rgb, w, h);
      out = r(cv::Rect((w - size) / 2, (h - size) / 2, size, size));
      break;
    }
    case CropMode::kRandom: {
      const int big = static_cast<int>(std::ceil(spec.random_crop_scale * size));
      cv::Mat r = resize_to(rgb, big, big);
      std::uniform_int_distribution<int> offset(0, big - size);
      const int x0 = offset(rng);
      const int y0 = offset(rng);
      out = r(cv::Rect(x0, y0, size, size));
      break;
    }
  }
  bool flip = false;
  if (spec.flip) flip = std::uniform_int_distribution<int>(0, 1)(rng) == 1;

  Tensor t({3, size, size});
  const int64_t plane = static_cast<int64_t>(size) * size;
  for (int y = 0; y < size; ++y) {
    const uint8_t* row = out.ptr<uint8_t>(y);
    for (int x = 0; x < size; ++x) {
      const int sx = flip ? size - 1 - x : x;
      for (int c = 0; c < 3; ++c) {
        t[c * plane + static_cast<int64_t>(y) * size + x] =
            static_cast<float>(row[sx * 3 + c]) / 127.5f - 1.0f;
      }
    }
  }
  return t;
}

ImageBatch load_batch(const std::vector<fs::path>& files,
                      const std::vector<std::string>& ids, Domain domain,
                      const PreprocessSpec& spec, std::mt19937_64& rng, bool strict) {
  ImageBatch batch;
  batch.domain = domain;
  std::vector<Tensor> items;
  for (size_t i = 0; i < files.size(); ++i) {
    Raster raster;
    try {
      raster = decode_image(files[i]);
    } catch (const LoadError& e) {
      if (strict) throw;
      spdlog::warn("skipping {}: {}", files[i].string(), e.what());
      continue;
    }
    items.push_back(preprocess(raster, spec, rng));
    batch.ids.push_back(ids[i]);
  }
  const int64_t size = spec.out_size;
  batch.data = Tensor({static_cast<int64_t>(items.size()), 3, size, size});
  for (size_t i = 0; i < items.size(); ++i) {
    std::copy(items[i].data(), items[i].data() + items[i].numel(),
              batch.data.data() + i * items[i].numel());
  }
  return batch;
}

EpochPlan plan_epoch(size_t count_x, size_t count_y, int batch_size,
                     std::mt19937_64& rng) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (count_x == 0 || count_y == 0) throw ConfigError("cannot plan an epoch over an empty domain");
  std::vector<size_t> xs(count_x);
  std::iota(xs.begin(), xs.end(), size_t{0});
  std::shuffle(xs.begin(), xs.end(), rng);

  std::vector<size_t> ys(count_x);
  if (count_y == count_x) {
    std::iota(ys.begin(), ys.end(), size_t{0});
    std::shuffle(ys.begin(), ys.end(), rng);
  } else {
    std::uniform_int_distribution<size_t> pick(0, count_y - 1);
    for (auto& y : ys) y = pick(rng);
  }

  EpochPlan plan;
  for (size_t start = 0; start < count_x; start += batch_size) {
    const size_t end = std::min(count_x, start + static_cast<size_t>(batch_size));
    plan.x_batches.emplace_back(xs.begin() + start, xs.begin() + end);
    plan.y_batches.emplace_back(ys.begin() + start, ys.begin() + end);
  }
  return plan;
}

UnpairedSampler::UnpairedSampler(DatasetManifest manifest, int batch_size,
                                 PreprocessSpec spec, bool strict)
    : manifest_(std::move(manifest)), batch_size_(batch_size), spec_(spec), strict_(strict) {
  if (batch_size_ < 1) throw ConfigError("batch_size must be >= 1");
  spec_.validate();
  manifest_.validate();
}

void UnpairedSampler::begin_epoch(std::mt19937_64& rng) {
  plan_ = plan_epoch(manifest_.count_x(), manifest_.count_y(), batch_size_, rng);
  cursor_ = 0;
}

size_t UnpairedSampler::batches_per_epoch() const {
  return (manifest_.count_x() + batch_size_ - 1) / batch_size_;
}

std::string UnpairedSampler::id_of(const fs::path& p) const {
  return p.lexically_relative(manifest_.root).generic_string();
}

bool UnpairedSampler::next(std::mt19937_64& rng, UnpairedBatch& out) {
  while (cursor_ < plan_.x_batches.size()) {
    const auto& xi = plan_.x_batches[cursor_];
    const auto& yi = plan_.y_batches[cursor_];
    ++cursor_;
    std::vector<fs::path> xf, yf;
    std::vector<std::string> xid, yid;
    for (size_t i : xi) {
      xf.push_back(manifest_.domain_x[i]);
      xid.push_back(id_of(manifest_.domain_x[i]));
    }
    for (size_t i : yi) {
      yf.push_back(manifest_.domain_y[i]);
      yid.push_back(id_of(manifest_.domain_y[i]));
    }
    out.x = load_batch(xf, xid, Domain::kPaintings, spec_, rng, strict_);
    out.y = load_batch(yf, yid, Domain::kNatural, spec_, rng, strict_);
    if (out.x.size() == 0 || out.y.size() == 0) continue;
    out.x_indices = xi;
    out.y_indices = yi;
    return true;
  }
  return false;
}

std::pair<ImageBatch, ImageBatch> sample_unpaired(const DatasetManifest& manifest,
                                                  int batch_size,
                                                  const PreprocessSpec& spec,
                                                  std::mt19937_64& rng) {
  if (manifest.split != Split::kTrain) {
    throw ConfigError("sample_unpaired needs a train manifest");
  }
  UnpairedSampler sampler(manifest, batch_size, spec);
  sampler.begin_epoch(rng);
  UnpairedBatch b;
  if (!sampler.next(rng, b)) throw LoadError("no decodable images to sample");
  return {std::move(b.x), std::move(b.y)};
}

}  // namespace dstn

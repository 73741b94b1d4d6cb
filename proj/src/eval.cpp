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
#include "dstn/eval.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "dstn/data.hpp"
#include "dstn/errors.hpp"
#include "dstn/image_io.hpp"
#include "dstn/model.hpp"
#include "dstn/ops.hpp"
#include "dstn/optim.hpp"

namespace dstn {

namespace fs = std::filesystem;

const std::vector<std::string>& flower_classes() {
  static const std::vector<std::string> kClasses = {
      "lotus",  "camellia",  "chrysanthemum", "peach blossom", "peony",
      "magnolia", "sunflower", "wintersweet",  "others"};
  return kClasses;
}

void LabeledSet::validate() const {
  if (items.empty()) throw ConfigError("labeled set is empty");
  for (const auto& [path, label] : items) {
    if (label < 0 || label >= static_cast<int>(classes.size())) {
      throw ConfigError("label " + std::to_string(label) + " of " + path.string() +
                        " is outside the " + std::to_string(classes.size()) +
                        "-class vocabulary");
    }
  }
}

std::vector<int> LabeledSet::labels() const {
  std::vector<int> out;
  for (const auto& item : items) out.push_back(item.second);
  return out;
}

std::vector<fs::path> LabeledSet::files() const {
  std::vector<fs::path> out;
  for (const auto& item : items) out.push_back(item.first);
  return out;
}

LabeledSet load_labeled_set(const fs::path& root,
                            const std::optional<std::vector<std::string>>& vocabulary) {
  if (!fs::is_directory(root)) throw LoadError("no such directory: " + root.string());
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path().filename().string());
  }
  std::sort(dirs.begin(), dirs.end());
  LabeledSet set;
  set.classes = vocabulary ? *vocabulary : dirs;
  for (const auto& d : dirs) {
    auto it = std::find(set.classes.begin(), set.classes.end(), d);
    if (it == set.classes.end()) {
      throw ConfigError("class directory '" + d + "' is not in the vocabulary");
    }
    const int label = static_cast<int>(it - set.classes.begin());
    for (const auto& f : list_images(root / d)) set.items.emplace_back(f, label);
  }
  set.validate();
  return set;
}

double classification_accuracy(const std::vector<int>& predictions,
                               const std::vector<int>& truth) {
  if (predictions.size() != truth.size()) {
    throw ShapeError("classification_accuracy: " + std::to_string(predictions.size()) +
                     " predictions for " + std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw ShapeError("classification_accuracy: no items");
  int64_t correct = 0;
  for (size_t i = 0; i < truth.size(); ++i) correct += predictions[i] == truth[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
}

double classification_accuracy(const std::vector<int>& predictions, const LabeledSet& truth) {
  return classification_accuracy(predictions, truth.labels());
}

// ---------------------------------------------------------------- probe

LinearProbeClassifier::LinearProbeClassifier(FeatureExtractor backbone,
                                             std::vector<std::string> classes, uint64_t seed,
                                             double init_std)
    : backbone_(std::move(backbone)), classes_(std::move(classes)) {
  if (classes_.size() < 2) throw ConfigError("a classifier needs at least two classes");
  const int64_t k = static_cast<int64_t>(classes_.size());
  const int64_t c = backbone_.output_channels();
  head_ = {{"fc.weight", Var(Tensor({k, c}), true)}, {"fc.bias", Var(Tensor({k}), true)}};
  std::mt19937_64 rng(seed);
  init_parameters(head_, GaussianInit{0.0, init_std}, rng);
}

Var LinearProbeClassifier::logits(const Var& features) const {
  return ops::linear(features, head_[0].var, head_[1].var);
}

std::vector<int> LinearProbeClassifier::predict_features(const Tensor& features) const {
  NoGradGuard no_grad;
  const Tensor l = logits(Var(features)).value();
  const int64_t n = l.dim(0), k = l.dim(1);
  std::vector<int> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const float* row = l.data() + i * k;
    out[i] = static_cast<int>(std::max_element(row, row + k) - row);
  }
  return out;
}

std::vector<int> LinearProbeClassifier::predict_files(const std::vector<fs::path>& files,
                                                      int image_size) const {
  return predict_features(pooled_features(backbone_, files, image_size));
}

std::map<std::string, std::string> LinearProbeClassifier::classify(
    const std::vector<fs::path>& files, int image_size) const {
  const std::vector<int> pred = predict_files(files, image_size);
  std::map<std::string, std::string> out;
  for (size_t i = 0; i < files.size(); ++i) {
    out[files[i].filename().string()] = classes_[pred[i]];
  }
  return out;
}

Tensor pooled_features(const FeatureExtractor& backbone, const std::vector<fs::path>& files,
                       int image_size) {
  if (files.empty()) throw ConfigError("no images to embed");
  const PreprocessSpec spec = PreprocessSpec::test(image_size);
  std::mt19937_64 unused_rng(0);
  const int64_t per = 3LL * image_size * image_size;
  const int64_t c = backbone.output_channels();
  Tensor out({static_cast<int64_t>(files.size()), c});
  constexpr size_t kChunk = 8;
  for (size_t start = 0; start < files.size(); start += kChunk) {
    const size_t n = std::min(kChunk, files.size() - start);
    Tensor batch({static_cast<int64_t>(n), 3, image_size, image_size});
    for (size_t i = 0; i < n; ++i) {
      const Tensor chw = preprocess(decode_image(files[start + i]), spec, unused_rng);
      std::copy_n(chw.data(), per, batch.data() + i * per);
    }
    const Tensor e = backbone.embed(batch);
    std::copy_n(e.data(), e.numel(), out.data() + start * c);
  }
  return out;
}

LinearProbeClassifier fine_tune_classifier(const FeatureExtractor& backbone,
                                           const LabeledSet& train_set,
                                           const FineTuneConfig& config) {
  train_set.validate();
  if (config.epochs < 0 || config.batch_size < 1 || !(config.lr > 0.0)) {
    throw ConfigError("fine-tune needs epochs >= 0, batch_size >= 1 and lr > 0");
  }
  const std::vector<int> all_labels = train_set.labels();
  const std::set<int> present(all_labels.begin(), all_labels.end());
  if (train_set.classes.size() < 2 || present.size() < 2) {
    throw ConfigError("fine-tuning needs at least two classes with examples");
  }
  LinearProbeClassifier clf(backbone, train_set.classes, config.seed, config.init_std);
  if (config.epochs == 0) return clf;

  // The backbone is frozen, so its pooled features are computed once.
  const Tensor features = pooled_features(backbone, train_set.files(), config.image_size);
  const std::vector<int>& labels = all_labels;
  const int64_t n = features.dim(0), c = features.dim(1);
  Adam opt(clf.head_parameters(), AdamOptions{0.9, 0.999, 1e-8});
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (int64_t start = 0; start < n; start += config.batch_size) {
      const int64_t m = std::min<int64_t>(config.batch_size, n - start);
      Tensor xb({m, c});
      std::vector<int> yb(static_cast<size_t>(m));
      for (int64_t i = 0; i < m; ++i) {
        const int64_t src = order[start + i];
        std::copy_n(features.data() + src * c, c, xb.data() + i * c);
        yb[i] = labels[src];
      }
      const Var loss = ops::cross_entropy(clf.logits(Var(xb)), yb);
      total += loss.item() * static_cast<double>(m);
      opt.zero_grad();
      backward(loss);
      opt.step(config.lr);
    }
    spdlog::debug("fine-tune epoch {} loss {:.4f}", epoch + 1, total / n);
  }
  return clf;
}

// ---------------------------------------------------------------- segmentation

SegmentationMask::SegmentationMask(int h, int w, std::vector<int> values)
    : height(h), width(w), cells(std::move(values)) {
  if (h < 1 || w < 1 || cells.size() != static_cast<size_t>(h) * w) {
    throw ShapeError("mask of " + std::to_string(h) + "x" + std::to_string(w) + " needs " +
                     std::to_string(static_cast<int64_t>(h) * w) + " cells, got " +
                     std::to_string(cells.size()));
  }
}

SegmentationMask load_mask(const fs::path& path) {
  const Raster r = decode_label_image(path);
  return SegmentationMask(r.height, r.width, std::vector<int>(r.pixels.begin(), r.pixels.end()));
}

namespace {

void require_same_grid(const SegmentationMask& a, const SegmentationMask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw ShapeError("mask shapes differ: " + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width));
  }
}

}  // namespace

void SegmentationCounts::add(const SegmentationMask& pred, const SegmentationMask& truth,
                             int cls) {
  require_same_grid(pred, truth);
  int64_t inter = 0, uni = 0, eq = 0;
  for (size_t i = 0; i < truth.cells.size(); ++i) {
    const bool p = pred.cells[i] == cls, t = truth.cells[i] == cls;
    eq += pred.cells[i] == truth.cells[i];
    inter += p && t;
    uni += p || t;
  }
  cells += static_cast<int64_t>(truth.cells.size());
  correct += eq;
  intersection += inter;
  union_ += uni;
  ++images;
  empty_class_images += uni == 0;
}

double SegmentationCounts::pixel_accuracy() const {
  if (cells == 0) throw ShapeError("no cells counted");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(cells);
}

double SegmentationCounts::iou() const {
  if (images == 0) throw ShapeError("no masks counted");
  if (union_ == 0) return 100.0;
  return 100.0 * static_cast<double>(intersection) / static_cast<double>(union_);
}

double pixel_accuracy(const SegmentationMask& pred, const SegmentationMask& truth) {
  SegmentationCounts c;
  c.add(pred, truth, 0);
  return c.pixel_accuracy();
}

double iou(const SegmentationMask& pred, const SegmentationMask& truth, int cls) {
  SegmentationCounts c;
  c.add(pred, truth, cls);
  return c.iou();
}

SegmentationCounts evaluate_segmentation(const fs::path& pred_dir, const fs::path& truth_dir,
                                         int cls) {
  const std::vector<fs::path> truths = list_images(truth_dir);
  if (truths.empty()) throw LoadError("no masks in " + truth_dir.string());
  SegmentationCounts counts;
  for (const auto& t : truths) {
    const fs::path p = pred_dir / t.filename();
    if (!fs::exists(p)) throw LoadError("missing predicted mask " + p.string());
    counts.add(load_mask(p), load_mask(t), cls);
  }
  return counts;
}

// ---------------------------------------------------------------- reports

std::string format_percent(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

std::string ReportTable::to_text() const {
  std::vector<size_t> width(columns.size(), 0);
  for (size_t c = 0; c < columns.size(); ++c) width[c] = columns[c].size();
  for (const auto& row : rows) {
    if (row.size() != columns.size()) throw ShapeError("report row has wrong arity");
    for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  if (!title.empty()) os << title << "\n";
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t c = 0; c < cells.size(); ++c) {
      if (c) os << "  ";
      // First column left-aligned, numbers right-aligned.
      if (c == 0) {
        os << std::left << std::setw(static_cast<int>(width[c])) << cells[c];
      } else {
        os << std::right << std::setw(static_cast<int>(width[c])) << cells[c];
      }
    }
    os << "\n";
  };
  line(columns);
  size_t total = 0;
  for (size_t w : width) total += w;
  os << std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') << "\n";
  for (const auto& row : rows) line(row);
  for (const auto& n : notes) os << "note: " << n << "\n";
  return os.str();
}

nlohmann::json ReportTable::to_json() const {
  nlohmann::json r = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json o;
    for (size_t c = 0; c < columns.size() && c < row.size(); ++c) o[columns[c]] = row[c];
    r.push_back(o);
  }
  return {{"title", title}, {"columns", columns}, {"rows", r}, {"notes", notes}};
}

}  // namespace dstn

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
#ifndef DSTN_EVAL_HPP_
#define DSTN_EVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dstn/autograd.hpp"
#include "dstn/feature_extractor.hpp"

namespace dstn {

// ---------------------------------------------------------------- classification

// The 8 target flower categories plus "others".
const std::vector<std::string>& flower_classes();

struct LabeledSet {
  std::vector<std::pair<std::filesystem::path, int>> items;
  std::vector<std::string> classes;

  // Non-empty, every label indexes `classes`.
  void validate() const;
  std::vector<int> labels() const;
  std::vector<std::filesystem::path> files() const;
};

// Images under <root>/<class>/. With a vocabulary, labels follow its order and
// unknown class directories are an error; otherwise classes are the sorted
// directory names.
LabeledSet load_labeled_set(const std::filesystem::path& root,
                            const std::optional<std::vector<std::string>>& vocabulary = {});

// 100 * correct / total. Throws ShapeError on a length mismatch or empty input.
double classification_accuracy(const std::vector<int>& predictions,
                               const std::vector<int>& truth);
double classification_accuracy(const std::vector<int>& predictions, const LabeledSet& truth);

struct FineTuneConfig {
  int epochs = 5;
  int batch_size = 8;
  double lr = 1e-3;
  uint64_t seed = 0;
  int image_size = 224;
  double init_std = 0.02;
};

/// Frozen backbone + global average pooling + a trainable linear head.
class LinearProbeClassifier {
 public:
  LinearProbeClassifier(FeatureExtractor backbone, std::vector<std::string> classes,
                        uint64_t seed, double init_std = 0.02);

  // Logits [N, K] for pooled features [N, C].
  Var logits(const Var& features) const;
  std::vector<int> predict_features(const Tensor& features) const;
  std::vector<int> predict_files(const std::vector<std::filesystem::path>& files,
                                 int image_size) const;
  // Filename -> class name.
  std::map<std::string, std::string> classify(const std::vector<std::filesystem::path>& files,
                                              int image_size) const;

  const FeatureExtractor& backbone() const { return backbone_; }
  const std::vector<std::string>& classes() const { return classes_; }
  const ParameterList& head_parameters() const { return head_; }

 private:
  FeatureExtractor backbone_;
  std::vector<std::string> classes_;
  ParameterList head_;
};

// [N, C] pooled backbone features for image files.
Tensor pooled_features(const FeatureExtractor& backbone,
                       const std::vector<std::filesystem::path>& files, int image_size);

/// Trains only the linear head with softmax cross-entropy and Adam. Needs at
/// least two classes. epochs = 0 returns the freshly initialized head.
LinearProbeClassifier fine_tune_classifier(const FeatureExtractor& backbone,
                                           const LabeledSet& train_set,
                                           const FineTuneConfig& config);

// ---------------------------------------------------------------- segmentation

struct SegmentationMask {
  int height = 0;
  int width = 0;
  std::vector<int> cells;  // row-major class ids

  SegmentationMask() = default;
  SegmentationMask(int h, int w, std::vector<int> values);
  int at(int r, int c) const { return cells[static_cast<size_t>(r) * width + c]; }
};

SegmentationMask load_mask(const std::filesystem::path& path);

// 100 * equal cells / cells. Throws ShapeError on a shape mismatch.
double pixel_accuracy(const SegmentationMask& pred, const SegmentationMask& truth);
// 100 * |P ∩ T| / |P ∪ T| for class `cls`; 100 when both are empty.
double iou(const SegmentationMask& pred, const SegmentationMask& truth, int cls);

struct SegmentationCounts {
  int64_t cells = 0;
  int64_t correct = 0;
  int64_t intersection = 0;
  int64_t union_ = 0;
  int64_t images = 0;
  int64_t empty_class_images = 0;  // class absent from both masks

  void add(const SegmentationMask& pred, const SegmentationMask& truth, int cls);
  double pixel_accuracy() const;
  double iou() const;
};

// Pairs <pred_dir>/<name> with <truth_dir>/<name> for every mask in truth_dir.
SegmentationCounts evaluate_segmentation(const std::filesystem::path& pred_dir,
                                         const std::filesystem::path& truth_dir, int cls);

// ---------------------------------------------------------------- reports

struct ReportTable {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> notes;

  std::string to_text() const;
  nlohmann::json to_json() const;
};

std::string format_percent(double v);  // two decimals

}  // namespace dstn

#endif  // DSTN_EVAL_HPP_

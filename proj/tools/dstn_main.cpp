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
// Command-line front end: training, transfer, retrieval, evaluation and the
// perceptual-study service.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "dstn/data.hpp"
#include "dstn/errors.hpp"
#include "dstn/eval.hpp"
#include "dstn/feature_extractor.hpp"
#include "dstn/study.hpp"
#include "dstn/study_service.hpp"
#include "dstn/synthetic.hpp"
#include "dstn/trainer.hpp"
#include "dstn/transfer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dstn {
namespace {

// PASCAL VOC index of "bird".
constexpr int kVocBird = 3;

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw LoadError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  out << j.dump(2) << "\n";
  if (!out) throw LoadError("cannot write " + p.string());
}

// "100+100" -> {100, 100}; "5" -> {5, 0}.
std::pair<int, int> parse_epochs(const std::string& s) {
  const auto plus = s.find('+');
  try {
    size_t used = 0;
    const int a = std::stoi(s.substr(0, plus), &used);
    if (used != (plus == std::string::npos ? s.size() : plus)) throw std::invalid_argument(s);
    int b = 0;
    if (plus != std::string::npos) {
      b = std::stoi(s.substr(plus + 1), &used);
      if (used != s.size() - plus - 1) throw std::invalid_argument(s);
    }
    return {a, b};
  } catch (const std::logic_error&) {
    throw ConfigError("--epochs expects N or N+M, got '" + s + "'");
  }
}

void emit_report(const ReportTable& table, const std::string& json_path) {
  std::cout << table.to_text();
  if (!json_path.empty()) write_json(json_path, table.to_json());
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  std::string data, config, out = "runs/dstn", resume, extractor, adv, epochs;
  std::optional<double> alpha_g, alpha_f, beta, gamma;
  std::optional<uint64_t> seed;
  std::optional<int> image_size, batch_size, pool, checkpoint_every;
};

int run_train(const TrainArgs& a) {
  std::unique_ptr<TrainState> state;
  TrainConfig config;
  if (!a.resume.empty()) {
    Checkpoint ckpt = load_checkpoint(a.resume);
    config = ckpt.config;
    state = std::move(ckpt.state);
    spdlog::info("resuming from {} at epoch {}", a.resume, state->epoch);
  } else if (!a.config.empty()) {
    config = TrainConfig::from_json(read_json(a.config));
  }
  // Flags override the file; a resumed run may only extend its schedule.
  if (a.alpha_g) config.weights.alpha_g = *a.alpha_g;
  if (a.alpha_f) config.weights.alpha_f = *a.alpha_f;
  if (a.beta) config.weights.beta = *a.beta;
  if (a.gamma) config.weights.gamma = *a.gamma;
  if (!a.adv.empty()) config.adv_variant = parse_adv_variant(a.adv);
  if (!a.epochs.empty()) std::tie(config.epochs_constant, config.epochs_decay) = parse_epochs(a.epochs);
  if (a.seed) config.seed = *a.seed;
  if (a.image_size) config.image_size = *a.image_size;
  if (a.batch_size) config.batch_size = *a.batch_size;
  if (a.pool) config.pool_capacity = *a.pool;
  if (a.checkpoint_every) config.checkpoint_every = *a.checkpoint_every;
  if (!a.extractor.empty()) config.content_extractor.weights_path = a.extractor;
  config.validate();
  if (state && !a.resume.empty()) {
    const bool shape_changed = a.seed || a.image_size || a.batch_size || a.pool;
    if (shape_changed) throw ConfigError("--seed/--image-size/--batch-size/--pool cannot change on resume");
  }

  std::optional<FeatureExtractor> extractor;
  if (config.weights.gamma > 0) {
    if (config.content_extractor.weights_path.empty()) {
      throw ConfigError(
          "content loss needs backbone weights: set content_extractor.weights_path or --extractor "
          "(see `dstn make-extractor` and tools/export_vgg16.py)");
    }
    extractor = FeatureExtractor::load(config.content_extractor);
  }
  if (!state) state = TrainState::create(config);

  const DatasetManifest manifest = load_manifest(a.data, Split::kTrain);
  spdlog::info("data: {} paintings, {} photos; {} epochs", manifest.count_x(), manifest.count_y(),
               config.total_epochs());
  fs::create_directories(a.out);
  write_json(fs::path(a.out) / "config.json", config.to_json());

  FitOptions options;
  options.out_dir = a.out;
  options.on_epoch = [](int epoch, const LossReport& r) {
    spdlog::info("epoch {}: {}", epoch, report_to_json(r).dump());
  };
  const auto written = fit(*state, config, manifest, extractor ? &*extractor : nullptr, options);
  for (const auto& p : written) std::cout << p.string() << "\n";
  return 0;
}

// ------------------------------------------------------------------ study

ReportTable study_table(const std::vector<StudySession>& sessions) {
  std::set<std::string> methods;
  for (const auto& s : sessions) {
    for (const auto& t : s.trials) {
      if (!t.method.empty()) methods.insert(t.method);
    }
  }
  ReportTable table;
  table.title = "Human perceptual study: trials judged real [%]";
  table.columns = {"Source", "Judged real", "Answered"};
  const json r = study_results_json(sessions, {methods.begin(), methods.end()});
  auto row = [&](const std::string& name, const json& stats) {
    table.rows.push_back({name,
                          stats["percent"].is_null() ? "n/a" : format_percent(stats["percent"]),
                          std::to_string(stats["answered"].get<int64_t>())});
  };
  row("Real images", r["real"]);
  for (const auto& m : methods) row(m, r["methods"][m]);
  table.notes.push_back("sessions: " + std::to_string(sessions.size()) + " (" +
                        std::to_string(r["complete_sessions"].get<int64_t>()) + " complete)");
  table.notes.push_back("exposure within 1000 +/- 50 ms: " +
                        std::to_string(r["exposure"]["within_tolerance"].get<int64_t>()) + "/" +
                        std::to_string(r["exposure"]["measured"].get<int64_t>()));
  return table;
}

std::atomic<StudyServer*> g_server{nullptr};

void on_signal(int) {
  if (StudyServer* s = g_server.load()) s->stop();
}

}  // namespace
}  // namespace dstn

int main(int argc, char** argv) {
  using namespace dstn;
  CLI::App app{"Domain style transfer: training, transfer and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error")->capture_default_str();

  // train
  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train G/F and both discriminators");
  train->add_option("--data", ta.data, "Root holding train/X (paintings) and train/Y (photos)")
      ->required()->check(CLI::ExistingDirectory);
  train->add_option("--config", ta.config, "TrainConfig JSON")->check(CLI::ExistingFile);
  train->add_option("--out", ta.out, "Checkpoint and metrics directory")->capture_default_str();
  train->add_option("--resume", ta.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  train->add_option("--extractor", ta.extractor, "Content backbone weights (.dstn archive)");
  train->add_option("--alpha-g", ta.alpha_g, "Cycle weight through G");
  train->add_option("--alpha-f", ta.alpha_f, "Cycle weight through F");
  train->add_option("--beta", ta.beta, "Identity weight");
  train->add_option("--gamma", ta.gamma, "Content weight");
  train->add_option("--adv", ta.adv, "nll | lsgan");
  train->add_option("--epochs", ta.epochs, "Constant+decay epochs, e.g. 100+100");
  train->add_option("--seed", ta.seed);
  train->add_option("--image-size", ta.image_size);
  train->add_option("--batch-size", ta.batch_size);
  train->add_option("--pool", ta.pool, "Fake-image pool capacity");
  train->add_option("--checkpoint-every", ta.checkpoint_every, "Epochs between checkpoints (0: final only)");

  // transfer
  TransferRequest tr;
  std::string direction = "G";
  bool lenient = false;
  auto* transfer_cmd = app.add_subcommand("transfer", "Translate images with a trained generator");
  transfer_cmd->add_option("--ckpt", tr.checkpoint)->required()->check(CLI::ExistingFile);
  transfer_cmd->add_option("--dir", direction, "G: painting->photo, F: photo->painting")
      ->check(CLI::IsMember({"G", "F"}))->capture_default_str();
  transfer_cmd->add_option("--in", tr.inputs, "Image file or directory")->required()->check(CLI::ExistingPath);
  transfer_cmd->add_option("--out", tr.out_dir)->required();
  transfer_cmd->add_option("--size", tr.out_size)->capture_default_str();
  transfer_cmd->add_flag("--lenient", lenient, "Skip undecodable inputs instead of failing");

  // nn
  std::string nn_query, nn_gallery, nn_weights, nn_layer = "relu2_2", nn_report;
  int nn_k = 5, nn_size = 256;
  auto* nn = app.add_subcommand("nn", "Rank gallery images by cosine similarity of pooled features");
  nn->add_option("--query", nn_query)->required()->check(CLI::ExistingFile);
  nn->add_option("--gallery", nn_gallery)->required()->check(CLI::ExistingDirectory);
  nn->add_option("--k", nn_k)->capture_default_str();
  nn->add_option("--extractor", nn_weights, "Backbone weights")->required()->check(CLI::ExistingFile);
  nn->add_option("--layer", nn_layer)->capture_default_str();
  nn->add_option("--size", nn_size)->capture_default_str();
  nn->add_option("--report", nn_report, "Write JSON result here");

  // embed
  std::string em_image, em_weights, em_layer = "relu2_2";
  int em_size = 256;
  auto* embed = app.add_subcommand("embed", "Print pooled backbone features of one image as JSON");
  embed->add_option("--image", em_image)->required()->check(CLI::ExistingFile);
  embed->add_option("--extractor", em_weights)->required()->check(CLI::ExistingFile);
  embed->add_option("--layer", em_layer)->capture_default_str();
  embed->add_option("--size", em_size)->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluation protocols");
  eval->require_subcommand(1);
  std::string report_path;

  std::string cls_train, cls_test, cls_weights, cls_layer = "relu2_2";
  bool cls_flowers = false;
  FineTuneConfig ft;
  auto* cls = eval->add_subcommand("cls", "Linear-probe classification accuracy");
  cls->add_option("--train", cls_train, "<root>/<class>/ images")->required()->check(CLI::ExistingDirectory);
  cls->add_option("--test", cls_test, "<root>/<class>/ images")->required()->check(CLI::ExistingDirectory);
  cls->add_option("--extractor", cls_weights)->required()->check(CLI::ExistingFile);
  cls->add_option("--layer", cls_layer)->capture_default_str();
  cls->add_flag("--flower-classes", cls_flowers, "Use the fixed 9-class flower vocabulary");
  cls->add_option("--epochs", ft.epochs)->capture_default_str();
  cls->add_option("--lr", ft.lr)->capture_default_str();
  cls->add_option("--batch-size", ft.batch_size)->capture_default_str();
  cls->add_option("--size", ft.image_size)->capture_default_str();
  cls->add_option("--seed", ft.seed);
  cls->add_option("--report", report_path, "Write JSON report here");

  std::string seg_pred, seg_truth;
  int seg_class = kVocBird;
  auto* seg = eval->add_subcommand("seg", "Pixel accuracy and class IOU over mask folders");
  seg->add_option("--pred", seg_pred)->required()->check(CLI::ExistingDirectory);
  seg->add_option("--truth", seg_truth)->required()->check(CLI::ExistingDirectory);
  seg->add_option("--class", seg_class, "Class id for IOU (VOC bird = 3)")->capture_default_str();
  seg->add_option("--report", report_path, "Write JSON report here");

  std::string study_store;
  auto* study = eval->add_subcommand("study", "Deception rates from stored study sessions");
  study->add_option("--store", study_store)->required()->check(CLI::ExistingDirectory);
  study->add_option("--report", report_path, "Write JSON report here");

  // serve-study
  std::string serve_images, serve_store, serve_token, serve_host = "127.0.0.1";
  int serve_port = 8080, serve_per_bucket = 50;
  auto* serve = app.add_subcommand("serve-study", "Run the perceptual-study HTTP service");
  serve->add_option("--images", serve_images, "Root with real/ and fake/<method>/")
      ->required()->check(CLI::ExistingDirectory);
  serve->add_option("--store", serve_store, "Session log directory")->required();
  serve->add_option("--token", serve_token, "Admin token for /api/results")->envname("DSTN_ADMIN_TOKEN");
  serve->add_option("--host", serve_host)->capture_default_str();
  serve->add_option("--port", serve_port)->capture_default_str();
  serve->add_option("--per-bucket", serve_per_bucket)->capture_default_str();

  // make-extractor
  std::string mx_out, mx_layer = "relu2_2";
  uint64_t mx_seed = 0;
  std::vector<int> mx_widths{64, 128, 256, 512, 512};
  auto* mx = app.add_subcommand("make-extractor",
                                "Write seeded stand-in VGG-16 weights (offline smoke runs only)");
  mx->add_option("--out", mx_out)->required();
  mx->add_option("--layer", mx_layer)->capture_default_str();
  mx->add_option("--seed", mx_seed)->capture_default_str();
  mx->add_option("--widths", mx_widths, "Five block widths")->expected(5);

  // make-toy-data
  std::string toy_out;
  int toy_train = 50, toy_test = 10, toy_size = 64;
  uint64_t toy_seed = 2026;
  auto* toy = app.add_subcommand("make-toy-data", "Write the synthetic squares/circles domains");
  toy->add_option("--out", toy_out)->required();
  toy->add_option("--train", toy_train)->capture_default_str();
  toy->add_option("--test", toy_test)->capture_default_str();
  toy->add_option("--size", toy_size)->capture_default_str();
  toy->add_option("--seed", toy_seed)->capture_default_str();

  // manifest
  std::string mf_data, mf_split = "train", mf_out;
  auto* mf = app.add_subcommand("manifest", "List a dataset split as JSON");
  mf->add_option("--data", mf_data)->required()->check(CLI::ExistingDirectory);
  mf->add_option("--split", mf_split)->check(CLI::IsMember({"train", "test"}))->capture_default_str();
  mf->add_option("--out", mf_out, "Write here instead of stdout");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*train) return run_train(ta);

    if (*transfer_cmd) {
      tr.direction = parse_direction(direction);
      tr.strict = !lenient;
      for (const auto& p : transfer(tr)) std::cout << p.string() << "\n";
      return 0;
    }

    if (*nn) {
      const auto ex = FeatureExtractor::load({"vgg16", nn_layer, nn_weights});
      const NeighborResult r = nearest_neighbors(nn_query, nn_gallery, nn_k, ex, nn_size);
      std::cout << r.to_json().dump(2) << "\n";
      if (!nn_report.empty()) write_json(nn_report, r.to_json());
      return 0;
    }

    if (*embed) {
      const auto ex = FeatureExtractor::load({"vgg16", em_layer, em_weights});
      std::mt19937_64 unused(0);
      const ImageBatch b = load_batch({em_image}, {fs::path(em_image).filename().string()},
                                      Domain::kNatural, PreprocessSpec::test(em_size), unused);
      const Tensor f = ex.embed(b.data);
      std::cout << json{{"image", em_image}, {"layer", em_layer},
                        {"features", std::vector<float>(f.values().begin(), f.values().end())}}
                       .dump()
                << "\n";
      return 0;
    }

    if (*cls) {
      const auto ex = FeatureExtractor::load({"vgg16", cls_layer, cls_weights});
      std::optional<std::vector<std::string>> vocab;
      if (cls_flowers) vocab = flower_classes();
      const LabeledSet train_set = load_labeled_set(cls_train, vocab);
      const LabeledSet test_set = load_labeled_set(cls_test, train_set.classes);
      const auto clf = fine_tune_classifier(ex, train_set, ft);
      const double acc =
          classification_accuracy(clf.predict_files(test_set.files(), ft.image_size), test_set);
      ReportTable t;
      t.title = "Fine-grained classification accuracy [%]";
      t.columns = {"Test set", "Accuracy", "Images"};
      t.rows.push_back({fs::path(cls_test).filename().string(), format_percent(acc),
                        std::to_string(test_set.items.size())});
      t.notes.push_back("backbone " + ex.spec().layer + " frozen; only the final linear layer trained");
      emit_report(t, report_path);
      return 0;
    }

    if (*seg) {
      const SegmentationCounts c = evaluate_segmentation(seg_pred, seg_truth, seg_class);
      ReportTable t;
      t.title = "Segmentation accuracy";
      t.columns = {"Predictions", "Pixel Acc", "IOU"};
      t.rows.push_back({fs::path(seg_pred).filename().string(), format_percent(c.pixel_accuracy()),
                        format_percent(c.iou())});
      t.notes.push_back("pixel accuracy is over all classes; IOU is for class " +
                        std::to_string(seg_class) + "; both pooled over " +
                        std::to_string(c.images) + " images");
      if (c.empty_class_images > 0) {
        t.notes.push_back(std::to_string(c.empty_class_images) +
                          " images have the class in neither mask (counted as agreement)");
      }
      emit_report(t, report_path);
      return 0;
    }

    if (*study) {
      const SessionStore store(study_store);
      emit_report(study_table(store.load_all()), report_path);
      return 0;
    }

    if (*serve) {
      if (serve_token.empty()) throw ConfigError("--token or DSTN_ADMIN_TOKEN is required");
      StudyServer server(study_config_from_dirs(serve_images, serve_store, serve_token, serve_per_bucket));
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      spdlog::info("study service on http://{}:{}", serve_host, serve_port);
      server.listen(serve_host, serve_port);
      g_server = nullptr;
      return 0;
    }

    if (*mx) {
      write_standin_vgg16(mx_out, mx_seed, mx_layer, mx_widths);
      spdlog::warn("{} holds random stand-in weights, not pretrained VGG-16", mx_out);
      return 0;
    }

    if (*toy) {
      write_toy_domains(toy_out, toy_train, toy_test, toy_size, toy_seed);
      return 0;
    }

    if (*mf) {
      const json j = load_manifest(mf_data, parse_split(mf_split)).to_json();
      if (mf_out.empty()) {
        std::cout << j.dump(2) << "\n";
      } else {
        write_json(mf_out, j);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}

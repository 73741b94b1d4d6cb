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
#include "dstn/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "dstn/errors.hpp"
#include "dstn/ops.hpp"
#include "dstn/serialize.hpp"

namespace dstn {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

std::string adv_variant_name(AdversarialVariant v) {
  return v == AdversarialVariant::kNll ? "nll" : "least_squares";
}

AdversarialVariant parse_adv_variant(const std::string& name) {
  if (name == "nll") return AdversarialVariant::kNll;
  if (name == "least_squares" || name == "lsgan") return AdversarialVariant::kLeastSquares;
  throw ConfigError("unknown adversarial variant '" + name +
                    "' (expected nll, lsgan or least_squares)");
}

namespace {

std::string norm_name(NormKind k) { return k == NormKind::kBatch ? "batch" : "instance"; }

NormKind parse_norm(const std::string& s) {
  if (s == "instance") return NormKind::kInstance;
  if (s == "batch") return NormKind::kBatch;
  throw ConfigError("unknown norm '" + s + "'");
}

std::string crop_name(CropMode c) {
  switch (c) {
    case CropMode::kNone: return "none";
    case CropMode::kCenter: return "center";
    case CropMode::kRandom: return "random";
  }
  return "none";
}

CropMode parse_crop(const std::string& s) {
  if (s == "none") return CropMode::kNone;
  if (s == "center") return CropMode::kCenter;
  if (s == "random") return CropMode::kRandom;
  throw ConfigError("unknown crop mode '" + s + "'");
}

// Reads j[key] into out when present. Type errors become ConfigError.
template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> names(known.begin(), known.end());
  for (const auto& [k, _] : j.items()) {
    if (!names.count(k)) throw ConfigError("unknown config key '" + where + k + "'");
  }
}

}  // namespace

PreprocessSpec TrainConfig::preprocess() const {
  PreprocessSpec p = PreprocessSpec::train(image_size);
  p.crop = crop;
  p.flip = flip;
  return p;
}

void TrainConfig::validate() const {
  weights.validate();
  if (epochs_constant < 0 || epochs_decay < 0 || total_epochs() < 1) {
    throw ConfigError("epochs_constant + epochs_decay must be >= 1 with both >= 0");
  }
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("base_lr must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (pool_capacity < 0) throw ConfigError("pool_capacity must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (!(init.std >= 0.0)) throw ConfigError("init std must be >= 0");
  generator.validate();
  discriminator.validate();
  preprocess().validate();
}

json TrainConfig::to_json() const {
  return json{
      {"weights",
       {{"alpha_g", weights.alpha_g},
        {"alpha_f", weights.alpha_f},
        {"beta", weights.beta},
        {"gamma", weights.gamma}}},
      {"adv_variant", adv_variant_name(adv_variant)},
      {"epochs_constant", epochs_constant},
      {"epochs_decay", epochs_decay},
      {"base_lr", base_lr},
      {"batch_size", batch_size},
      {"pool_capacity", pool_capacity},
      {"seed", seed},
      {"checkpoint_every", checkpoint_every},
      {"generator",
       {{"base_channels", generator.base_channels},
        {"n_res_blocks", generator.n_res_blocks},
        {"n_downsample", generator.n_downsample},
        {"norm", norm_name(generator.norm)}}},
      {"discriminator",
       {{"base_channels", discriminator.base_channels},
        {"n_layers", discriminator.n_layers},
        {"norm", norm_name(discriminator.norm)}}},
      {"content_extractor",
       {{"backbone", content_extractor.backbone},
        {"layer", content_extractor.layer},
        {"weights_path", content_extractor.weights_path.string()}}},
      {"init", {{"mean", init.mean}, {"std", init.std}}},
      {"adam", {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}}},
      {"image_size", image_size},
      {"crop", crop_name(crop)},
      {"flip", flip},
      {"strict_data", strict_data},
  };
}

TrainConfig TrainConfig::from_json(const json& j) {
  reject_unknown(j,
                 {"weights", "adv_variant", "epochs_constant", "epochs_decay",
                  "base_lr", "batch_size", "pool_capacity", "seed", "checkpoint_every",
                  "generator", "discriminator", "content_extractor", "init", "adam",
                  "image_size", "crop", "flip", "strict_data"},
                 "");
  TrainConfig c;
  if (auto it = j.find("weights"); it != j.end()) {
    reject_unknown(*it, {"alpha_g", "alpha_f", "beta", "gamma"}, "weights.");
    read_opt(*it, "alpha_g", c.weights.alpha_g);
    read_opt(*it, "alpha_f", c.weights.alpha_f);
    read_opt(*it, "beta", c.weights.beta);
    read_opt(*it, "gamma", c.weights.gamma);
  }
  std::string s;
  if (j.contains("adv_variant")) {
    read_opt(j, "adv_variant", s);
    c.adv_variant = parse_adv_variant(s);
  }
  read_opt(j, "epochs_constant", c.epochs_constant);
  read_opt(j, "epochs_decay", c.epochs_decay);
  read_opt(j, "base_lr", c.base_lr);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "pool_capacity", c.pool_capacity);
  read_opt(j, "seed", c.seed);
  read_opt(j, "checkpoint_every", c.checkpoint_every);
  if (auto it = j.find("generator"); it != j.end()) {
    reject_unknown(*it, {"base_channels", "n_res_blocks", "n_downsample", "norm"},
                   "generator.");
    read_opt(*it, "base_channels", c.generator.base_channels);
    read_opt(*it, "n_res_blocks", c.generator.n_res_blocks);
    read_opt(*it, "n_downsample", c.generator.n_downsample);
    if (it->contains("norm")) {
      read_opt(*it, "norm", s);
      c.generator.norm = parse_norm(s);
    }
  }
  if (auto it = j.find("discriminator"); it != j.end()) {
    reject_unknown(*it, {"base_channels", "n_layers", "norm"}, "discriminator.");
    read_opt(*it, "base_channels", c.discriminator.base_channels);
    read_opt(*it, "n_layers", c.discriminator.n_layers);
    if (it->contains("norm")) {
      read_opt(*it, "norm", s);
      c.discriminator.norm = parse_norm(s);
    }
  }
  if (auto it = j.find("content_extractor"); it != j.end()) {
    reject_unknown(*it, {"backbone", "layer", "weights_path"}, "content_extractor.");
    read_opt(*it, "backbone", c.content_extractor.backbone);
    read_opt(*it, "layer", c.content_extractor.layer);
    if (it->contains("weights_path")) {
      read_opt(*it, "weights_path", s);
      c.content_extractor.weights_path = s;
    }
  }
  if (auto it = j.find("init"); it != j.end()) {
    reject_unknown(*it, {"mean", "std"}, "init.");
    read_opt(*it, "mean", c.init.mean);
    read_opt(*it, "std", c.init.std);
  }
  if (auto it = j.find("adam"); it != j.end()) {
    reject_unknown(*it, {"beta1", "beta2", "eps"}, "adam.");
    read_opt(*it, "beta1", c.adam.beta1);
    read_opt(*it, "beta2", c.adam.beta2);
    read_opt(*it, "eps", c.adam.eps);
  }
  read_opt(j, "image_size", c.image_size);
  if (j.contains("crop")) {
    read_opt(j, "crop", s);
    c.crop = parse_crop(s);
  }
  read_opt(j, "flip", c.flip);
  read_opt(j, "strict_data", c.strict_data);
  c.validate();
  return c;
}

double lr_at_epoch(const TrainConfig& config, int epoch) {
  if (epoch < 0 || epoch >= config.total_epochs()) {
    throw ConfigError("epoch " + std::to_string(epoch) + " outside [0, " +
                      std::to_string(config.total_epochs()) + ")");
  }
  if (epoch < config.epochs_constant) return config.base_lr;
  const double progressed = epoch - config.epochs_constant + 1;
  return config.base_lr * (1.0 - progressed / config.epochs_decay);
}

// ---------------------------------------------------------------- pool

ImagePool::ImagePool(int capacity) : capacity_(capacity) {
  if (capacity < 0) throw ConfigError("pool capacity must be >= 0");
  buffer_.reserve(static_cast<size_t>(capacity));
}

Tensor ImagePool::query(const Tensor& image, std::mt19937_64& rng, bool* swapped) {
  if (swapped) *swapped = false;
  if (capacity_ == 0) return image;
  if (buffer_.size() < static_cast<size_t>(capacity_)) {
    buffer_.push_back(image);
    return image;
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < 0.5) return image;
  std::uniform_int_distribution<size_t> pick(0, buffer_.size() - 1);
  const size_t slot = pick(rng);
  Tensor old = std::move(buffer_[slot]);
  buffer_[slot] = image;
  if (swapped) *swapped = true;
  return old;
}

Tensor ImagePool::query_batch(const Tensor& images, std::mt19937_64& rng) {
  if (images.rank() != 4) throw ShapeError("pool expects N x C x H x W, got " +
                                           shape_string(images.shape()));
  const int64_t n = images.dim(0);
  const Shape one{images.dim(1), images.dim(2), images.dim(3)};
  const int64_t per = shape_numel(one);
  Tensor out(images.shape());
  for (int64_t i = 0; i < n; ++i) {
    Tensor img(one);
    std::copy_n(images.data() + i * per, per, img.data());
    const Tensor got = query(img, rng);
    require_same_shape(got, img, "image pool");
    std::copy_n(got.data(), per, out.data() + i * per);
  }
  return out;
}

void ImagePool::restore(std::vector<Tensor> buffer) {
  if (buffer.size() > static_cast<size_t>(capacity_)) {
    throw CheckpointError("pool holds " + std::to_string(buffer.size()) +
                          " images but capacity is " + std::to_string(capacity_));
  }
  buffer_ = std::move(buffer);
}

Tensor pool_query(ImagePool& pool, const Tensor& image, std::mt19937_64& rng) {
  return pool.query(image, rng);
}

// ---------------------------------------------------------------- state

namespace {

ParameterList concat(const ParameterList& a, const ParameterList& b,
                     const std::string& pa, const std::string& pb) {
  ParameterList out;
  for (const auto& p : a) out.push_back({pa + p.name, p.var});
  for (const auto& p : b) out.push_back({pb + p.name, p.var});
  return out;
}

}  // namespace

TrainState::TrainState(const TrainConfig& config)
    : g(config.generator, config.seed * 4 + 1, config.init),
      f(config.generator, config.seed * 4 + 2, config.init),
      d_x(config.discriminator, config.seed * 4 + 3, config.init),
      d_y(config.discriminator, config.seed * 4 + 4, config.init),
      rng(config.seed),
      pool_x(config.pool_capacity),
      pool_y(config.pool_capacity) {
  opt_generators = Adam(generator_parameters(), config.adam);
  opt_dx = Adam(d_x.parameters(), config.adam);
  opt_dy = Adam(d_y.parameters(), config.adam);
}

std::unique_ptr<TrainState> TrainState::create(const TrainConfig& config) {
  config.validate();
  return std::unique_ptr<TrainState>(new TrainState(config));
}

ParameterList TrainState::generator_parameters() const {
  return concat(g.parameters(), f.parameters(), "G.", "F.");
}

ParameterList TrainState::discriminator_parameters() const {
  return concat(d_x.parameters(), d_y.parameters(), "D_x.", "D_y.");
}

// ---------------------------------------------------------------- step

namespace {

Var scores_for(const Discriminator& d, const Var& images, AdversarialVariant v) {
  Var s = d.forward(images);
  return v == AdversarialVariant::kNll ? ops::sigmoid(s) : s;
}

void require_finite(double value, const char* term) {
  if (!std::isfinite(value)) {
    throw NonFiniteError(term, std::string("non-finite loss term ") + term);
  }
}

void require_finite_parameters(const ParameterList& params) {
  if (auto bad = first_non_finite(params)) {
    throw NonFiniteError(*bad, "non-finite parameter " + *bad + " after update");
  }
}

}  // namespace

namespace {

void check_step_inputs(const ImageBatch& x, const ImageBatch& y) {
  x.validate();
  y.validate();
  if (x.domain != Domain::kPaintings || y.domain != Domain::kNatural) {
    throw ConfigError("training expects x from domain X and y from domain Y");
  }
  if (x.data.shape() != y.data.shape()) {
    throw ShapeError("x and y batches differ: " + shape_string(x.data.shape()) + " vs " +
                     shape_string(y.data.shape()));
  }
}

}  // namespace

GeneratedImages update_generators(TrainState& state, const ImageBatch& x,
                                  const ImageBatch& y, const TrainConfig& config,
                                  double lr, const FeatureExtractor* extractor,
                                  LossReport* report) {
  check_step_inputs(x, y);
  const LossWeights& w = config.weights;
  if (w.gamma > 0.0 && extractor == nullptr) {
    throw ConfigError("gamma > 0 requires a content feature extractor");
  }
  const AdversarialVariant variant = config.adv_variant;
  const Var xv(x.data), yv(y.data);
  LossReport& rep = *report;

  // Frozen so that no gradient reaches the discriminators.
  const ParameterList disc = state.discriminator_parameters();
  set_requires_grad(disc, false);
  GeneratedImages out;
  try {
    const Var fake_y = state.g.forward(xv);
    const Var fake_x = state.f.forward(yv);

    std::vector<Var> terms;
    std::vector<double> coeffs;
    auto add = [&](Var term, double coeff, double& slot) {
      slot = term.item();
      terms.push_back(std::move(term));
      coeffs.push_back(coeff);
    };
    add(loss_adv_generator(scores_for(state.d_y, fake_y, variant), variant), 1.0, rep.adv_g);
    add(loss_adv_generator(scores_for(state.d_x, fake_x, variant), variant), 1.0, rep.adv_f);
    if (w.alpha_g > 0.0) {
      ++state.counters.cycle_forwards;
      add(loss_cycle(xv, state.f.forward(fake_y)), w.alpha_g, rep.cyc_g);
    }
    if (w.alpha_f > 0.0) {
      ++state.counters.cycle_forwards;
      add(loss_cycle(yv, state.g.forward(fake_x)), w.alpha_f, rep.cyc_f);
    }
    if (w.beta > 0.0) {
      state.counters.identity_forwards += 2;
      add(loss_identity(yv, state.g.forward(yv)), w.beta, rep.id_g);
      add(loss_identity(xv, state.f.forward(xv)), w.beta, rep.id_f);
    }
    if (w.gamma > 0.0) {
      const std::string& tap = extractor->spec().layer;
      FeatureMap phi_x, phi_y;
      {
        NoGradGuard no_grad;
        phi_x = {extractor->forward(xv), tap};
        phi_y = {extractor->forward(yv), tap};
      }
      state.counters.content_terms += 2;
      add(loss_content(phi_x, {extractor->forward(fake_y), tap}), w.gamma, rep.con_g);
      add(loss_content(phi_y, {extractor->forward(fake_x), tap}), w.gamma, rep.con_f);
    }
    // Names the offending term on NaN/Inf.
    rep.total_g = total_generator_objective(rep, w);

    const Var total = ops::weighted_sum(terms, coeffs);
    state.opt_generators.zero_grad();
    backward(total);
    state.opt_generators.step(lr);
    out.fake_y = fake_y.value();
    out.fake_x = fake_x.value();
  } catch (...) {
    set_requires_grad(disc, true);
    throw;
  }
  set_requires_grad(disc, true);
  require_finite_parameters(state.generator_parameters());
  return out;
}

void update_discriminators(TrainState& state, const ImageBatch& x, const ImageBatch& y,
                           const GeneratedImages& fakes, const TrainConfig& config,
                           double lr, LossReport* report) {
  check_step_inputs(x, y);
  require_same_shape(fakes.fake_y, y.data, "update_discriminators");
  require_same_shape(fakes.fake_x, x.data, "update_discriminators");
  const AdversarialVariant variant = config.adv_variant;
  auto update = [&](Discriminator& d, Adam& opt, ImagePool& pool, const Tensor& real,
                    const Tensor& fake, double& slot, const char* term) {
    const Tensor replay = pool.query_batch(fake, state.rng);
    const Var loss = loss_adv_discriminator(scores_for(d, Var(real), variant),
                                            scores_for(d, Var(replay), variant), variant);
    slot = loss.item();
    require_finite(slot, term);
    opt.zero_grad();
    backward(loss);
    opt.step(lr);
  };
  update(state.d_y, state.opt_dy, state.pool_y, y.data, fakes.fake_y, report->adv_dy,
         "adv_dy");
  update(state.d_x, state.opt_dx, state.pool_x, x.data, fakes.fake_x, report->adv_dx,
         "adv_dx");
  require_finite_parameters(state.discriminator_parameters());
}

LossReport train_step(TrainState& state, const ImageBatch& x, const ImageBatch& y,
                      const TrainConfig& config, double lr,
                      const FeatureExtractor* extractor) {
  LossReport report;
  const GeneratedImages fakes =
      update_generators(state, x, y, config, lr, extractor, &report);
  update_discriminators(state, x, y, fakes, config, lr, &report);
  ++state.step;
  return report;
}

json report_to_json(const LossReport& r) {
  return json{{"adv_g", r.adv_g},   {"adv_f", r.adv_f}, {"adv_dx", r.adv_dx},
              {"adv_dy", r.adv_dy}, {"cyc_g", r.cyc_g}, {"cyc_f", r.cyc_f},
              {"id_g", r.id_g},     {"id_f", r.id_f},   {"con_g", r.con_g},
              {"con_f", r.con_f},   {"total_g", r.total_g}};
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr double LossReport::*kReportFields[] = {
    &LossReport::adv_g, &LossReport::adv_f, &LossReport::adv_dx, &LossReport::adv_dy,
    &LossReport::cyc_g, &LossReport::cyc_f, &LossReport::id_g,   &LossReport::id_f,
    &LossReport::con_g, &LossReport::con_f, &LossReport::total_g};

void write_params(BinaryWriter& w, const ParameterList& params) {
  w.u64(params.size());
  for (const auto& p : params) {
    w.str(p.name);
    w.tensor(p.var.value());
  }
}

void read_params(BinaryReader& r, const ParameterList& params, const std::string& what) {
  const uint64_t n = r.u64();
  if (n != params.size()) {
    throw CheckpointError(what + ": expected " + std::to_string(params.size()) +
                          " parameters, found " + std::to_string(n));
  }
  for (const auto& p : params) {
    const std::string name = r.str();
    Tensor t = r.tensor();
    if (name != p.name || t.shape() != p.var.shape()) {
      throw CheckpointError(what + ": parameter '" + name + "' " + shape_string(t.shape()) +
                            " does not match '" + p.name + "' " +
                            shape_string(p.var.shape()));
    }
    Var v = p.var;
    v.mutable_value() = std::move(t);
  }
}

void write_adam(BinaryWriter& w, const Adam& opt) {
  w.i64(opt.steps());
  w.u64(opt.first_moments().size());
  for (size_t i = 0; i < opt.first_moments().size(); ++i) {
    w.tensor(opt.first_moments()[i]);
    w.tensor(opt.second_moments()[i]);
  }
}

void read_adam(BinaryReader& r, Adam& opt, const std::string& what) {
  opt.set_steps(r.i64());
  const uint64_t n = r.u64();
  if (n != opt.first_moments().size()) {
    throw CheckpointError(what + ": optimizer moment count mismatch");
  }
  for (size_t i = 0; i < n; ++i) {
    Tensor m = r.tensor(), v = r.tensor();
    if (m.shape() != opt.first_moments()[i].shape() ||
        v.shape() != opt.second_moments()[i].shape()) {
      throw CheckpointError(what + ": optimizer moment shape mismatch");
    }
    opt.first_moments()[i] = std::move(m);
    opt.second_moments()[i] = std::move(v);
  }
}

void write_pool(BinaryWriter& w, const ImagePool& pool) {
  w.u64(pool.size());
  for (const auto& t : pool.buffer()) w.tensor(t);
}

void read_pool(BinaryReader& r, ImagePool& pool) {
  const uint64_t n = r.u64();
  if (n > static_cast<uint64_t>(pool.capacity())) {
    throw CheckpointError("pool size exceeds capacity");
  }
  std::vector<Tensor> buf;
  for (uint64_t i = 0; i < n; ++i) buf.push_back(r.tensor());
  pool.restore(std::move(buf));
}

}  // namespace

void save_checkpoint(const TrainState& state, const TrainConfig& config,
                     const std::string& extractor_checksum, const fs::path& path) {
  BinaryWriter w;
  w.str(config.to_json().dump());
  w.str(extractor_checksum);
  w.i64(state.epoch);
  w.i64(state.step);
  std::ostringstream rng_text;
  rng_text << state.rng;
  w.str(rng_text.str());
  write_params(w, state.g.parameters());
  write_params(w, state.f.parameters());
  write_params(w, state.d_x.parameters());
  write_params(w, state.d_y.parameters());
  write_adam(w, state.opt_generators);
  write_adam(w, state.opt_dx);
  write_adam(w, state.opt_dy);
  write_pool(w, state.pool_x);
  write_pool(w, state.pool_y);
  w.u64(state.history.size());
  for (const auto& rep : state.history) {
    for (auto field : kReportFields) w.f64(rep.*field);
  }
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  write_container(path, kCheckpointMagic, kCheckpointVersion, w.bytes());
}

Checkpoint load_checkpoint(const fs::path& path,
                           const std::optional<std::string>& expected_extractor_checksum) {
  Container c;
  try {
    c = read_container(path, kCheckpointMagic);
  } catch (const CheckpointError&) {
    throw;
  } catch (const LoadError& e) {
    throw CheckpointError(e.what());
  }
  if (c.version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": checkpoint format version " +
                          std::to_string(c.version) + ", this build reads version " +
                          std::to_string(kCheckpointVersion));
  }
  Checkpoint out;
  try {
    BinaryReader r(c.payload);
    json cfg;
    try {
      cfg = json::parse(r.str());
    } catch (const json::exception& e) {
      throw CheckpointError(std::string("embedded config is not JSON: ") + e.what());
    }
    out.config = TrainConfig::from_json(cfg);
    out.extractor_checksum = r.str();
    auto state = TrainState::create(out.config);
    state->epoch = static_cast<int>(r.i64());
    state->step = r.i64();
    std::istringstream rng_text(r.str());
    rng_text >> state->rng;
    if (rng_text.fail()) throw CheckpointError("corrupt generator state");
    read_params(r, state->g.parameters(), "G");
    read_params(r, state->f.parameters(), "F");
    read_params(r, state->d_x.parameters(), "D_x");
    read_params(r, state->d_y.parameters(), "D_y");
    read_adam(r, state->opt_generators, "generators");
    read_adam(r, state->opt_dx, "D_x");
    read_adam(r, state->opt_dy, "D_y");
    read_pool(r, state->pool_x);
    read_pool(r, state->pool_y);
    const uint64_t n = r.u64();
    for (uint64_t i = 0; i < n; ++i) {
      LossReport rep;
      for (auto field : kReportFields) rep.*field = r.f64();
      state->history.push_back(rep);
    }
    if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload");
    out.state = std::move(state);
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  if (expected_extractor_checksum && *expected_extractor_checksum != out.extractor_checksum) {
    out.warnings.push_back("content extractor checksum " + *expected_extractor_checksum +
                           " differs from the one recorded at training time (" +
                           (out.extractor_checksum.empty() ? std::string("none")
                                                           : out.extractor_checksum) +
                           ")");
  }
  return out;
}

fs::path checkpoint_path(const fs::path& dir, int epoch) {
  std::ostringstream name;
  name << "checkpoint_epoch_" << std::setw(4) << std::setfill('0') << epoch << ".dstn";
  return dir / name.str();
}

// ---------------------------------------------------------------- fit

std::vector<fs::path> fit(TrainState& state, const TrainConfig& config,
                          const DatasetManifest& manifest, const FeatureExtractor* extractor,
                          const FitOptions& options) {
  config.validate();
  manifest.validate();
  if (manifest.split != Split::kTrain) throw ConfigError("fit requires the train split");
  if (config.weights.gamma > 0.0 && extractor == nullptr) {
    throw ConfigError("gamma > 0 requires a content feature extractor");
  }
  const std::string extractor_checksum = extractor ? extractor->checksum() : "";
  std::vector<fs::path> written;
  if (!options.out_dir.empty()) fs::create_directories(options.out_dir);

  UnpairedSampler sampler(manifest, config.batch_size, config.preprocess(),
                          config.strict_data);
  for (int epoch = state.epoch; epoch < config.total_epochs(); ++epoch) {
    const double lr = lr_at_epoch(config, epoch);
    sampler.begin_epoch(state.rng);
    LossReport sum;
    int64_t steps = 0;
    UnpairedBatch batch;
    while (sampler.next(state.rng, batch)) {
      // Lenient loading can leave the two sides with different sizes.
      if (batch.x.size() == 0 || batch.y.size() == 0) continue;
      if (batch.x.size() != batch.y.size()) continue;
      const LossReport rep = train_step(state, batch.x, batch.y, config, lr, extractor);
      for (auto field : kReportFields) sum.*field += rep.*field;
      ++steps;
      if (options.on_step) options.on_step(epoch + 1, rep);
    }
    if (steps == 0) throw LoadError("epoch " + std::to_string(epoch + 1) + " had no usable batches");
    for (auto field : kReportFields) sum.*field /= static_cast<double>(steps);
    state.history.push_back(sum);
    state.epoch = epoch + 1;

    spdlog::info("epoch {}/{} lr={:.3g} steps={} total_g={:.4f} cyc_g={:.4f} id_g={:.4f}",
                 state.epoch, config.total_epochs(), lr, steps, sum.total_g, sum.cyc_g,
                 sum.id_g);
    if (!options.out_dir.empty()) {
      json line = report_to_json(sum);
      line["epoch"] = state.epoch;
      line["lr"] = lr;
      line["steps"] = steps;
      std::ofstream log(options.out_dir / "metrics.jsonl", std::ios::app);
      log << line.dump() << "\n";
      if (!log) throw LoadError("cannot append to metrics log in " + options.out_dir.string());
    }
    if (options.on_epoch) options.on_epoch(state.epoch, sum);

    const bool periodic =
        config.checkpoint_every > 0 && state.epoch % config.checkpoint_every == 0;
    const bool last = state.epoch == config.total_epochs();
    if (!options.out_dir.empty() && (periodic || last)) {
      const fs::path p = checkpoint_path(options.out_dir, state.epoch);
      save_checkpoint(state, config, extractor_checksum, p);
      written.push_back(p);
    }
  }
  return written;
}

}  // namespace dstn

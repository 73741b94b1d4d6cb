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
#include "dstn/study_service.hpp"

#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "dstn/data.hpp"
#include "dstn/errors.hpp"

namespace dstn {

namespace fs = std::filesystem;
using nlohmann::json;

void StudyServiceConfig::validate() const {
  if (admin_token.empty()) throw ConfigError("study service needs an admin token");
  auto check = [&](const std::vector<std::string>& pool) {
    for (const auto& id : pool) {
      if (!images.count(id)) throw ConfigError("no image file for id '" + id + "'");
    }
  };
  check(real_pool);
  for (const auto& [method, pool] : fake_pools) check(pool);
}

StudyServiceConfig study_config_from_dirs(const fs::path& image_root, const fs::path& store_dir,
                                          std::string admin_token, int per_bucket) {
  StudyServiceConfig c;
  c.store_dir = store_dir;
  c.admin_token = std::move(admin_token);
  c.per_bucket = per_bucket;
  auto add = [&](const fs::path& dir, const std::string& bucket) {
    std::vector<std::string> ids;
    for (const auto& file : list_images(dir)) {
      const std::string id = bucket + "/" + file.filename().string();
      c.images[id] = file;
      ids.push_back(id);
    }
    return ids;
  };
  c.real_pool = add(image_root / "real", "real");
  const fs::path fake_root = image_root / "fake";
  if (!fs::is_directory(fake_root)) throw ConfigError("missing " + fake_root.string());
  for (const auto& e : fs::directory_iterator(fake_root)) {
    if (!e.is_directory()) continue;
    const std::string method = e.path().filename().string();
    c.fake_pools[method] = add(e.path(), method);
  }
  c.expected_methods = static_cast<int>(c.fake_pools.size());
  return c;
}

json study_results_json(const std::vector<StudySession>& sessions,
                        const std::vector<std::string>& methods) {
  auto rate = [](auto compute) -> json {
    try {
      const RateStats r = compute();
      return {{"answered", r.answered}, {"judged_real", r.judged_real}, {"percent", r.percent()}};
    } catch (const ConfigError&) {
      return {{"answered", 0}, {"judged_real", 0}, {"percent", nullptr}};
    }
  };
  json out;
  out["sessions"] = sessions.size();
  out["complete_sessions"] = std::count_if(sessions.begin(), sessions.end(),
                                           [](const StudySession& s) { return s.complete(); });
  out["real"] = rate([&] { return real_recognition_rate(sessions); });
  out["methods"] = json::object();
  for (const auto& m : methods) {
    out["methods"][m] = rate([&] { return deception_rate(sessions, m); });
  }
  const ExposureStats e = exposure_compliance(sessions);
  out["exposure"] = {{"measured", e.measured},
                     {"within_tolerance", e.within_tolerance},
                     {"fraction", e.fraction()},
                     {"target_ms", kTargetExposureMs},
                     {"tolerance_ms", kExposureToleranceMs}};
  return out;
}

namespace {

json public_schedule(const StudySession& s) {
  json trials = json::array();
  for (const auto& t : s.trials) {
    trials.push_back({{"index", t.index},
                      {"image_url", "/api/sessions/" + s.session_id + "/trials/" +
                                        std::to_string(t.index) + "/image"}});
  }
  return {{"session_id", s.session_id},
          {"participant_id", s.participant_id},
          {"total", s.trials.size()},
          {"exposure_ms", kTargetExposureMs},
          {"trials", trials}};
}

json progress_json(const StudySession& s) {
  json next = nullptr;
  for (const auto& t : s.trials) {
    if (!t.response) {
      next = t.index;
      break;
    }
  }
  return {{"session_id", s.session_id},
          {"answered", s.answered()},
          {"total", s.trials.size()},
          {"next_index", next},
          {"complete", s.complete()}};
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

std::string content_type_for(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".bmp") return "image/bmp";
  return "application/octet-stream";
}

// Length-independent comparison of the admin token.
bool token_equal(const std::string& a, const std::string& b) {
  unsigned char diff = a.size() == b.size() ? 0 : 1;
  const size_t n = std::max(a.size(), b.size());
  for (size_t i = 0; i < n; ++i) {
    const unsigned char x = i < a.size() ? a[i] : 0;
    const unsigned char y = i < b.size() ? b[i] : 0;
    diff |= x ^ y;
  }
  return diff == 0;
}

std::optional<int> parse_index(const std::string& s) {
  if (s.empty() || s.size() > 9) return std::nullopt;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  return std::stoi(s);
}

}  // namespace

struct StudyServer::Impl {
  explicit Impl(StudyServiceConfig c) : config(std::move(c)), store(config.store_dir) {}

  StudyServiceConfig config;
  SessionStore store;
  httplib::Server server;
  std::thread thread;
  std::mutex id_mutex;
  std::mt19937_64 id_rng{std::random_device{}()};

  std::string new_session_id() {
    std::lock_guard<std::mutex> guard(id_mutex);
    for (;;) {
      char buf[20];
      std::snprintf(buf, sizeof(buf), "s%016llx", static_cast<unsigned long long>(id_rng()));
      if (!store.exists(buf)) return buf;
    }
  }

  std::vector<std::string> methods() const {
    std::vector<std::string> m;
    for (const auto& [name, pool] : config.fake_pools) m.push_back(name);
    return m;
  }

  void routes();
};

void StudyServer::Impl::routes() {
  server.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    json body = json::object();
    if (!req.body.empty()) {
      body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) return send_error(res, 400, "body must be a JSON object");
    }
    const json pid = body.value("participant_id", json(""));
    const json seed_j = body.contains("seed") ? body["seed"] : json(nullptr);
    if (!pid.is_string() || !(seed_j.is_null() || seed_j.is_number_unsigned())) {
      return send_error(res, 400, "participant_id must be a string and seed a non-negative integer");
    }
    const uint64_t seed = seed_j.is_null() ? std::random_device{}() : seed_j.get<uint64_t>();
    try {
      StudySession s = build_study_session(config.real_pool, config.fake_pools, config.per_bucket,
                                           seed, new_session_id(), pid.get<std::string>(),
                                           config.expected_methods);
      store.create(s);
      spdlog::info("study session {} created ({} trials)", s.session_id, s.trials.size());
      send_json(res, 201, public_schedule(s));
    } catch (const ConfigError& e) {
      send_error(res, 500, e.what());
    }
  });

  server.Get(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!store.exists(id)) return send_error(res, 404, "unknown session");
    send_json(res, 200, public_schedule(store.load(id)));
  });

  server.Get(R"(/api/sessions/([^/]+)/progress)",
             [this](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               if (!store.exists(id)) return send_error(res, 404, "unknown session");
               send_json(res, 200, progress_json(store.load(id)));
             });

  server.Get(R"(/api/sessions/([^/]+)/trials/([^/]+)/image)",
             [this](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               const auto index = parse_index(req.matches[2]);
               if (!store.exists(id)) return send_error(res, 404, "unknown session");
               const StudySession s = store.load(id);
               if (!index || *index >= static_cast<int>(s.trials.size())) {
                 return send_error(res, 404, "unknown trial");
               }
               const auto it = config.images.find(s.trials[*index].image_id);
               std::ifstream in(it == config.images.end() ? fs::path() : it->second,
                                std::ios::binary);
               if (!in) return send_error(res, 500, "image unavailable");
               std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
               res.status = 200;
               res.set_header("Cache-Control", "no-store");
               res.set_content(std::move(bytes), content_type_for(it->second));
             });

  server.Post(R"(/api/sessions/([^/]+)/trials/([^/]+)/response)",
              [this](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                const auto index = parse_index(req.matches[2]);
                if (!store.exists(id)) return send_error(res, 404, "unknown session");
                if (!index) return send_error(res, 404, "unknown trial");
                const json body = json::parse(req.body, nullptr, false);
                if (body.is_discarded() || !body.is_object() || !body.contains("response") ||
                    !body["response"].is_string() ||
                    !body.value("response_time_ms", json()).is_number_integer() ||
                    !body.value("exposure_ms", json()).is_number_integer()) {
                  return send_error(res, 400,
                                    "expected {\"response\", \"response_time_ms\", \"exposure_ms\"}");
                }
                try {
                  const StudySession s = store.append_response(
                      id, *index, parse_judgement(body["response"].get<std::string>()),
                      body["response_time_ms"].get<int>(), body["exposure_ms"].get<int>());
                  send_json(res, 201, progress_json(s));
                } catch (const UnknownTrialError& e) {
                  send_error(res, 404, e.what());
                } catch (const DuplicateResponseError& e) {
                  send_error(res, 409, e.what());
                } catch (const ConfigError& e) {
                  send_error(res, 400, e.what());
                }
              });

  server.Get("/api/results", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string auth = req.get_header_value("Authorization");
    const std::string prefix = "Bearer ";
    if (auth.rfind(prefix, 0) != 0 || !token_equal(auth.substr(prefix.size()), config.admin_token)) {
      res.set_header("WWW-Authenticate", "Bearer");
      return send_error(res, 401, "admin token required");
    }
    send_json(res, 200, study_results_json(store.load_all(), methods()));
  });

  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      spdlog::error("study service: {}", e.what());
    } catch (...) {
    }
    send_error(res, 500, "internal error");
  });
}

StudyServer::StudyServer(StudyServiceConfig config) {
  config.validate();
  impl_ = std::make_unique<Impl>(std::move(config));
  impl_->routes();
}

StudyServer::~StudyServer() { stop(); }

int StudyServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void StudyServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
  }
}

void StudyServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

SessionStore& StudyServer::store() { return impl_->store; }

}  // namespace dstn

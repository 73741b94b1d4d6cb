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
#include "dstn/study.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "dstn/errors.hpp"

namespace dstn {

namespace fs = std::filesystem;
using nlohmann::json;

std::string judgement_name(Judgement j) { return j == Judgement::kReal ? "real" : "fake"; }

Judgement parse_judgement(const std::string& s) {
  if (s == "real") return Judgement::kReal;
  if (s == "fake") return Judgement::kFake;
  throw ConfigError("judgement must be 'real' or 'fake', got '" + s + "'");
}

size_t StudySession::answered() const {
  return static_cast<size_t>(std::count_if(trials.begin(), trials.end(),
                                           [](const TrialRecord& t) { return t.response.has_value(); }));
}

StudySession build_study_session(const std::vector<std::string>& real_pool,
                                 const std::map<std::string, std::vector<std::string>>& fake_pools,
                                 int per_bucket, uint64_t seed, std::string session_id,
                                 std::string participant_id, int expected_methods) {
  if (per_bucket < 1) throw ConfigError("per_bucket must be >= 1");
  if (static_cast<int>(fake_pools.size()) != expected_methods) {
    throw ConfigError("expected " + std::to_string(expected_methods) + " fake methods, got " +
                      std::to_string(fake_pools.size()));
  }
  std::set<std::string> seen;
  auto check_pool = [&](const std::vector<std::string>& pool, const std::string& name) {
    const std::set<std::string> unique(pool.begin(), pool.end());
    if (static_cast<int>(unique.size()) < per_bucket) {
      throw ConfigError("pool '" + name + "' has " + std::to_string(unique.size()) +
                        " distinct images, need " + std::to_string(per_bucket));
    }
    for (const auto& id : unique) {
      if (!seen.insert(id).second) {
        throw ConfigError("image id '" + id + "' appears in more than one pool");
      }
    }
    return std::vector<std::string>(unique.begin(), unique.end());
  };

  std::mt19937_64 rng(seed);
  StudySession s;
  s.session_id = std::move(session_id);
  s.participant_id = std::move(participant_id);
  s.seed = seed;
  s.per_bucket = per_bucket;
  auto draw = [&](std::vector<std::string> pool, Judgement truth, const std::string& method) {
    // Sorted pool + seeded shuffle: independent of the caller's pool order.
    std::shuffle(pool.begin(), pool.end(), rng);
    for (int i = 0; i < per_bucket; ++i) {
      TrialRecord t;
      t.image_id = pool[i];
      t.truth = truth;
      t.method = method;
      s.trials.push_back(std::move(t));
    }
  };
  draw(check_pool(real_pool, "real"), Judgement::kReal, "");
  for (const auto& [method, pool] : fake_pools) {
    if (method.empty()) throw ConfigError("fake method names must be non-empty");
    draw(check_pool(pool, method), Judgement::kFake, method);
  }
  std::shuffle(s.trials.begin(), s.trials.end(), rng);
  for (size_t i = 0; i < s.trials.size(); ++i) s.trials[i].index = static_cast<int>(i);
  return s;
}

void record_response(StudySession& session, int trial_index, Judgement response,
                     int response_time_ms, int measured_exposure_ms) {
  if (trial_index < 0 || trial_index >= static_cast<int>(session.trials.size())) {
    throw UnknownTrialError("trial " + std::to_string(trial_index) + " is not in session '" +
                            session.session_id + "'");
  }
  TrialRecord& t = session.trials[static_cast<size_t>(trial_index)];
  if (t.response) {
    throw DuplicateResponseError("trial " + std::to_string(trial_index) +
                                 " already has a response");
  }
  if (response_time_ms < 0 || measured_exposure_ms < 0) {
    throw ConfigError("timings must be non-negative");
  }
  t.response = response;
  t.response_time_ms = response_time_ms;
  t.exposure_ms = measured_exposure_ms;
}

double RateStats::percent() const {
  if (answered == 0) throw ConfigError("no answered trials");
  return 100.0 * static_cast<double>(judged_real) / static_cast<double>(answered);
}

RateStats deception_rate(const std::vector<StudySession>& sessions, const std::string& method) {
  RateStats r;
  for (const auto& s : sessions) {
    for (const auto& t : s.trials) {
      if (t.truth != Judgement::kFake || t.method != method || !t.response) continue;
      ++r.answered;
      r.judged_real += *t.response == Judgement::kReal;
    }
  }
  if (r.answered == 0) {
    throw ConfigError("no answered trials for method '" + method + "'");
  }
  return r;
}

RateStats real_recognition_rate(const std::vector<StudySession>& sessions) {
  RateStats r;
  for (const auto& s : sessions) {
    for (const auto& t : s.trials) {
      if (t.truth != Judgement::kReal || !t.response) continue;
      ++r.answered;
      r.judged_real += *t.response == Judgement::kReal;
    }
  }
  if (r.answered == 0) throw ConfigError("no answered real-image trials");
  return r;
}

double ExposureStats::fraction() const {
  return measured == 0 ? 0.0 : static_cast<double>(within_tolerance) / static_cast<double>(measured);
}

ExposureStats exposure_compliance(const std::vector<StudySession>& sessions) {
  ExposureStats e;
  for (const auto& s : sessions) {
    for (const auto& t : s.trials) {
      if (!t.response) continue;
      ++e.measured;
      e.within_tolerance += std::abs(t.exposure_ms - kTargetExposureMs) <= kExposureToleranceMs;
    }
  }
  return e;
}

// ---------------------------------------------------------------- json

json session_to_json(const StudySession& s) {
  json trials = json::array();
  for (const auto& t : s.trials) {
    json o = {{"index", t.index},
              {"image_id", t.image_id},
              {"truth", judgement_name(t.truth)},
              {"method", t.method},
              {"exposure_ms", t.exposure_ms}};
    o["response"] = t.response ? json(judgement_name(*t.response)) : json(nullptr);
    o["response_time_ms"] = t.response_time_ms ? json(*t.response_time_ms) : json(nullptr);
    trials.push_back(std::move(o));
  }
  return {{"session_id", s.session_id},
          {"participant_id", s.participant_id},
          {"seed", s.seed},
          {"per_bucket", s.per_bucket},
          {"trials", trials}};
}

StudySession session_from_json(const json& j) {
  try {
    StudySession s;
    s.session_id = j.at("session_id").get<std::string>();
    s.participant_id = j.at("participant_id").get<std::string>();
    s.seed = j.at("seed").get<uint64_t>();
    s.per_bucket = j.at("per_bucket").get<int>();
    for (const auto& o : j.at("trials")) {
      TrialRecord t;
      t.index = o.at("index").get<int>();
      t.image_id = o.at("image_id").get<std::string>();
      t.truth = parse_judgement(o.at("truth").get<std::string>());
      t.method = o.at("method").get<std::string>();
      t.exposure_ms = o.at("exposure_ms").get<int>();
      if (!o.at("response").is_null()) t.response = parse_judgement(o["response"].get<std::string>());
      if (!o.at("response_time_ms").is_null()) t.response_time_ms = o["response_time_ms"].get<int>();
      s.trials.push_back(std::move(t));
    }
    return s;
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed session record: ") + e.what());
  }
}

// ---------------------------------------------------------------- store

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

SessionStore::SessionStore(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

fs::path SessionStore::path_of(const std::string& session_id) const {
  if (!valid_session_id(session_id)) {
    throw ConfigError("invalid session id '" + session_id + "'");
  }
  return dir_ / (session_id + ".jsonl");
}

std::mutex& SessionStore::lock_for(const std::string& session_id) {
  std::lock_guard<std::mutex> guard(registry_mutex_);
  auto& slot = locks_[session_id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

namespace {

void append_line(const fs::path& path, const json& record) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  out << record.dump() << "\n";
  out.flush();
  if (!out) throw LoadError("cannot append to " + path.string());
}

}  // namespace

void SessionStore::create(const StudySession& session) {
  const fs::path p = path_of(session.session_id);
  std::lock_guard<std::mutex> guard(lock_for(session.session_id));
  if (fs::exists(p)) throw ConfigError("session '" + session.session_id + "' already exists");
  if (session.answered() != 0) throw ConfigError("new sessions must have no responses");
  append_line(p, {{"type", "session"}, {"session", session_to_json(session)}});
}

bool SessionStore::exists(const std::string& session_id) const {
  return valid_session_id(session_id) && fs::exists(path_of(session_id));
}

StudySession SessionStore::load(const std::string& session_id) const {
  const fs::path p = path_of(session_id);
  std::ifstream in(p);
  if (!in) throw LoadError("unknown session '" + session_id + "'");
  std::string line;
  std::optional<StudySession> s;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception&) {
      // A torn final line from an interrupted append is ignored.
      if (in.peek() == EOF) break;
      throw LoadError(p.string() + ":" + std::to_string(line_no) + ": not JSON");
    }
    const std::string type = rec.value("type", "");
    if (type == "session") {
      if (s) throw LoadError(p.string() + ": duplicate session header");
      s = session_from_json(rec.at("session"));
    } else if (type == "response") {
      if (!s) throw LoadError(p.string() + ": response before session header");
      try {
        record_response(*s, rec.at("trial").get<int>(),
                        parse_judgement(rec.at("response").get<std::string>()),
                        rec.at("response_time_ms").get<int>(), rec.at("exposure_ms").get<int>());
      } catch (const json::exception& e) {
        throw LoadError(p.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    } else {
      throw LoadError(p.string() + ":" + std::to_string(line_no) + ": unknown record");
    }
  }
  if (!s) throw LoadError(p.string() + ": missing session header");
  return *s;
}

StudySession SessionStore::append_response(const std::string& session_id, int trial_index,
                                           Judgement response, int response_time_ms,
                                           int measured_exposure_ms) {
  const fs::path p = path_of(session_id);
  std::lock_guard<std::mutex> guard(lock_for(session_id));
  StudySession s = load(session_id);
  record_response(s, trial_index, response, response_time_ms, measured_exposure_ms);
  append_line(p, {{"type", "response"},
                  {"trial", trial_index},
                  {"response", judgement_name(response)},
                  {"response_time_ms", response_time_ms},
                  {"exposure_ms", measured_exposure_ms}});
  return s;
}

std::vector<std::string> SessionStore::list() const {
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir_)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") {
      ids.push_back(e.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<StudySession> SessionStore::load_all() const {
  std::vector<StudySession> out;
  for (const auto& id : list()) out.push_back(load(id));
  return out;
}

}  // namespace dstn

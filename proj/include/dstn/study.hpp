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
#ifndef DSTN_STUDY_HPP_
#define DSTN_STUDY_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dstn {

enum class Judgement { kReal, kFake };

std::string judgement_name(Judgement j);  // "real" | "fake"
Judgement parse_judgement(const std::string& s);

inline constexpr int kTargetExposureMs = 1000;
inline constexpr int kExposureToleranceMs = 50;

// Thrown for a trial index outside the session.
class UnknownTrialError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Thrown when a trial already has a response.
class DuplicateResponseError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct TrialRecord {
  int index = 0;
  std::string image_id;
  Judgement truth = Judgement::kReal;
  std::string method;  // empty for real images
  std::optional<Judgement> response;
  int exposure_ms = 0;
  std::optional<int> response_time_ms;

  bool operator==(const TrialRecord&) const = default;
};

struct StudySession {
  std::string session_id;
  std::string participant_id;
  uint64_t seed = 0;
  int per_bucket = 0;
  std::vector<TrialRecord> trials;

  size_t answered() const;
  bool complete() const { return answered() == trials.size(); }
  bool operator==(const StudySession&) const = default;
};

/// Draws per_bucket ids without replacement from the real pool and from each
/// fake method's pool, then shuffles the trial order, all from `seed`.
/// Throws ConfigError for a short pool, a wrong number of fake methods, or an
/// image id shared between pools.
StudySession build_study_session(const std::vector<std::string>& real_pool,
                                 const std::map<std::string, std::vector<std::string>>& fake_pools,
                                 int per_bucket = 50, uint64_t seed = 0,
                                 std::string session_id = {}, std::string participant_id = {},
                                 int expected_methods = 2);

// Stores a response once. Throws UnknownTrialError or DuplicateResponseError
// and leaves the session unchanged on failure.
void record_response(StudySession& session, int trial_index, Judgement response,
                     int response_time_ms, int measured_exposure_ms);

struct RateStats {
  int64_t answered = 0;
  int64_t judged_real = 0;
  double percent() const;  // 100 * judged_real / answered
};

// Share of a method's answered fake trials judged real. Throws ConfigError
// when no trial of the method has been answered.
RateStats deception_rate(const std::vector<StudySession>& sessions, const std::string& method);
// Share of answered real trials judged real.
RateStats real_recognition_rate(const std::vector<StudySession>& sessions);

struct ExposureStats {
  int64_t measured = 0;
  int64_t within_tolerance = 0;  // |exposure - 1000| <= 50
  double fraction() const;
};
ExposureStats exposure_compliance(const std::vector<StudySession>& sessions);

nlohmann::json session_to_json(const StudySession& s);
StudySession session_from_json(const nlohmann::json& j);

/// One append-only JSON-lines file per session: a "session" record holding
/// the schedule, then one "response" record per answer. Writes are serialized
/// per session id; reads may run concurrently.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir);

  // Throws ConfigError when the id exists.
  void create(const StudySession& session);
  bool exists(const std::string& session_id) const;
  // Replays the log. Throws LoadError for an unknown or corrupt session.
  StudySession load(const std::string& session_id) const;
  // Validates against the current state, then appends. Same errors as
  // record_response. Returns the updated session.
  StudySession append_response(const std::string& session_id, int trial_index,
                               Judgement response, int response_time_ms,
                               int measured_exposure_ms);
  std::vector<std::string> list() const;
  std::vector<StudySession> load_all() const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_of(const std::string& session_id) const;
  std::mutex& lock_for(const std::string& session_id);

  std::filesystem::path dir_;
  std::mutex registry_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

// Ids usable as file names: [A-Za-z0-9_-], 1..64 chars.
bool valid_session_id(const std::string& id);

}  // namespace dstn

#endif  // DSTN_STUDY_HPP_

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
#ifndef DSTN_STUDY_SERVICE_HPP_
#define DSTN_STUDY_SERVICE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dstn/study.hpp"

namespace dstn {

struct StudyServiceConfig {
  std::filesystem::path store_dir;
  // image id -> file served for that id.
  std::map<std::string, std::filesystem::path> images;
  std::vector<std::string> real_pool;
  std::map<std::string, std::vector<std::string>> fake_pools;
  int per_bucket = 50;
  int expected_methods = 2;
  std::string admin_token;

  // Throws ConfigError for an empty token or a pool id without an image.
  void validate() const;
};

// Reads <root>/real and <root>/fake/<method> image folders; ids are
// "<bucket>/<file name>".
StudyServiceConfig study_config_from_dirs(const std::filesystem::path& image_root,
                                          const std::filesystem::path& store_dir,
                                          std::string admin_token, int per_bucket = 50);

/// HTTP front end over a SessionStore.
///   POST /api/sessions                                 create; body {"participant_id", "seed"?}
///   GET  /api/sessions/{id}                            schedule (no labels)
///   GET  /api/sessions/{id}/trials/{i}/image           image bytes
///   POST /api/sessions/{id}/trials/{i}/response        201 | 400 | 404 | 409
///   GET  /api/sessions/{id}/progress                   answered / total / next
///   GET  /api/results                                  needs "Authorization: Bearer <token>"
/// Trial payloads carry only the index and an opaque image URL.
class StudyServer {
 public:
  explicit StudyServer(StudyServiceConfig config);
  ~StudyServer();
  StudyServer(const StudyServer&) = delete;
  StudyServer& operator=(const StudyServer&) = delete;

  // Binds and serves on a background thread. port 0 picks a free port.
  // Returns the bound port; throws ConfigError when binding fails.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

  SessionStore& store();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Aggregate statistics as served by /api/results.
nlohmann::json study_results_json(const std::vector<StudySession>& sessions,
                                  const std::vector<std::string>& methods);

}  // namespace dstn

#endif  // DSTN_STUDY_SERVICE_HPP_

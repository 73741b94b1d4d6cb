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
#ifndef DSTN_ERRORS_HPP_
#define DSTN_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dstn {

// Invalid architecture or training configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Tensor shapes that do not satisfy an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Missing or malformed files: weights, images, manifests, checkpoints.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public LoadError {
 public:
  using LoadError::LoadError;
};

// A loss term or parameter became NaN/Inf. term() names the offender.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string term, const std::string& what)
      : std::runtime_error(what), term_(std::move(term)) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

}  // namespace dstn

#endif  // DSTN_ERRORS_HPP_

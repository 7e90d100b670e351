// Copyright 2026 The rba-workbench Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace rba {

// Invalid shapes, parameters or configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loss diverged (NaN/Inf) during optimization. CLI exit code 3.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Malformed manifest / config / checkpoint file. CLI exit code 4.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Synthetic scene generator could not satisfy its placement constraints.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Metric has no defined value (e.g. ASR over zero attacked objects).
class MetricUndefined : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rba

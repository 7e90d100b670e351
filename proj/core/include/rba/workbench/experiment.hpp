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

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rba/evalbench/metrics.hpp"
#include "rba/workbench/config.hpp"

namespace rba::exp {

struct RunRecord {
  std::string run_id;
  std::string run_dir;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string status;  // completed, failed or interrupted
  std::string failed_stage;
  std::string error;
  std::vector<std::string> stages_run;
  std::vector<std::string> stages_skipped;
  std::map<std::string, std::string> checkpoints;  // model tag -> path
  std::map<std::string, std::string> reports;      // name -> path
  std::vector<std::string> sweep_dirs;
  double wall_seconds = 0;
  std::string source_digest;

  std::string to_json() const;
};

struct RunOptions {
  std::function<void(const std::string&)> log;
  // Stops the first training stage after this many epochs (simulated interruption).
  std::optional<int> halt_after_epochs;
};

// Stages run in order data, clean, poison, backdoor, mad, eval, report.
// Completed stages (DONE marker) are skipped; partial training resumes from
// its per-epoch state. A stage failure marks the run failed and rethrows.
RunRecord run_experiment(const cfg::RunConfig& config, const std::string& run_dir,
                         const RunOptions& opts = {});
RunRecord run_experiment(const std::string& config_path, const std::string& run_dir,
                         const RunOptions& opts = {});

struct EvalEntry {
  std::string model;  // clean, bod or rd
  std::string kind;   // none, gaussian, motion_blur, rain, light
  double value = 0;
  std::string file;   // relative to the run directory
};
std::vector<EvalEntry> load_eval_index(const std::string& run_dir);
eval::MetricsReport load_metrics(const std::string& path);

// Reads a run's eval artifacts and writes the report bundle under report/.
void emit_report(const std::string& run_dir);

std::string read_text(const std::string& path);
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace rba::exp

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

// rba: command line front end for the workbench pipeline.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rba/errors.hpp"
#include "rba/physnoise/noise.hpp"
#include "rba/workbench/config.hpp"
#include "rba/workbench/experiment.hpp"
#include "rba/workbench/png_io.hpp"

namespace {

struct Common {
  std::string config_path;
  std::string run_dir;
  std::vector<std::string> sets;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "run config file (flat JSON)");
  app->add_option("-r,--run-dir", c.run_dir, "run directory")->required();
  app->add_option("-s,--set", c.sets, "override a config key, key=value");
  app->add_flag("-q,--quiet", c.quiet, "suppress progress output");
}

rba::cfg::RunConfig build_config(const Common& c, const std::string& stages) {
  rba::cfg::RunConfig cfg =
      c.config_path.empty() ? rba::cfg::RunConfig::defaults() : rba::cfg::RunConfig::load(c.config_path);
  for (const auto& s : c.sets) cfg.set_from_string(s);
  if (!stages.empty()) {
    cfg.set("pipeline.stages", stages);
    cfg.clear_sweep();
  }
  return cfg;
}

int run_pipeline(const Common& c, const std::string& stages, std::optional<int> halt = std::nullopt) {
  rba::exp::RunOptions opts;
  if (!c.quiet) opts.log = [](const std::string& m) { std::cerr << m << "\n"; };
  opts.halt_after_epochs = halt;
  const rba::exp::RunRecord rec = rba::exp::run_experiment(build_config(c, stages), c.run_dir, opts);
  std::cout << rec.run_dir << ": " << rec.status << "\n";
  return rec.status == "failed" ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rba: robust backdoor attack workbench for object detection"};
  app.require_subcommand(1);

  Common common;
  std::string regime = "clean";
  std::optional<int> halt;

  auto* synth = app.add_subcommand("synth-data", "generate the synthetic train/val sets");
  add_common(synth, common);
  auto* poison = app.add_subcommand("poison", "build the poisoned training set");
  add_common(poison, common);
  auto* train = app.add_subcommand("train", "train a clean or backdoored detector");
  add_common(train, common);
  train->add_option("--regime", regime, "clean or backdoor")->check(CLI::IsMember({"clean", "backdoor"}));
  auto* mad = app.add_subcommand("mad-train", "malicious adversarial training from the backdoored model");
  add_common(mad, common);
  auto* evalc = app.add_subcommand("eval", "evaluate every available model under the configured noise grid");
  add_common(evalc, common);
  auto* run = app.add_subcommand("run", "run the pipeline named by pipeline.stages, including sweeps");
  add_common(run, common);
  run->add_option("--halt-after", halt, "stop the first training stage after N epochs");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "re-emit the report bundle of a run directory");
  report->add_option("-r,--run-dir", report_dir, "run directory")->required();

  std::string in_png, out_png, kind, region = "whole";
  double value = 0, angle = 0;
  std::uint64_t seed = 0;
  std::vector<int> rect;
  auto* na = app.add_subcommand("noise-apply", "apply one physical noise to a PNG");
  na->add_option("--in", in_png, "input PNG")->required();
  na->add_option("--out", out_png, "output PNG")->required();
  na->add_option("--kind", kind, "gaussian, motion_blur, rain or light")->required();
  na->add_option("--value", value, "variance, degree, drop count or saturation factor")->required();
  na->add_option("--angle", angle, "motion blur angle in degrees");
  na->add_option("--seed", seed, "noise seed");
  na->add_option("--region", region, "whole or trigger");
  na->add_option("--rect", rect, "trigger rectangle x0 y0 w h")->expected(4);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*synth) return run_pipeline(common, "data");
    if (*poison) return run_pipeline(common, "data,poison");
    if (*train) return run_pipeline(common, regime == "clean" ? "data,clean" : "data,poison,backdoor");
    if (*mad) return run_pipeline(common, "data,poison,mad");
    if (*evalc) return run_pipeline(common, "data,eval");
    if (*run) return run_pipeline(common, "", halt);
    if (*report) {
      rba::exp::emit_report(report_dir);
      return 0;
    }
    if (*na) {
      rba::noise::NoiseSpec spec;
      spec.kind = rba::noise::parse_kind(kind);
      spec.value = value;
      spec.angle = angle;
      spec.seed = seed;
      spec.region = rba::noise::parse_region(region);
      spec.validate();
      std::vector<rba::poison::PixelRect> regions;
      if (!rect.empty()) regions.push_back({rect[0], rect[1], rect[2], rect[3]});
      rba::io::write_png(out_png, rba::noise::apply(rba::io::read_png(in_png), spec, regions));
      return 0;
    }
  } catch (const rba::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const rba::TrainingError& e) {
    std::cerr << "training error (epoch " << e.epoch() << "): " << e.what() << "\n";
    return 3;
  } catch (const rba::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

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

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rba/dataset.hpp"
#include "rba/detector/detector.hpp"
#include "rba/physnoise/noise.hpp"
#include "rba/poisoncraft/poison.hpp"

namespace rba::eval {

using DetList = std::vector<det::Detection>;
using GtList = std::vector<det::Annotation>;

struct MatchRecord {
  std::size_t image = 0;
  std::size_t gt = 0;   // index within the image's gt list
  int det = -1;         // index within the image's detection list, -1 if unmatched
  double iou = 0;
  double score = 0;
};

// Continuous AP@iou_thr for class `cls`. nullopt when the class has neither
// ground truths nor detections.
std::optional<double> average_precision(std::span<const DetList> dets, std::span<const GtList> gts,
                                        int cls, double iou_thr,
                                        std::vector<MatchRecord>* matches = nullptr);

struct AsrResult {
  double asr = 0;
  std::size_t attacked = 0;
  std::size_t successes = 0;
  std::map<int, std::array<std::size_t, 2>> per_class;  // class -> {successes, attacked}
};

// Per-object disappearance rate. With target_class < 0 each object's own
// class is the one that must vanish.
AsrResult attack_success_rate(std::span<const DetList> dets_on_attacked,
                              std::span<const poison::AttackedObject> objects, int target_class,
                              double conf_thr, double iou_thr);

struct EvalConfig {
  double iou = 0.5;
  double ap_conf = 0.001;  // detections kept for AP
  double asr_conf = det::kDefaultConfThreshold;
  double nms_iou = det::kDefaultNmsIou;
  int target_class = 0;
  bool all_object = false;
  std::optional<noise::NoiseSpec> noise;
};

struct MetricsReport {
  double ap_b = 0;
  double map_b = 0;
  std::optional<double> map_a;
  double ap_ab = 0;
  double map_ab = 0;
  std::optional<double> asr;
  std::map<int, double> per_class_b, per_class_a, per_class_ab;
  std::map<int, double> asr_per_class;
  EvalConfig config;
  std::string noise_label = "none";
  std::size_t images_b = 0, images_a = 0;
  std::size_t boxes_b = 0, boxes_a = 0;
  std::size_t attacked_objects = 0;

  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
};

// Noise is applied to every evaluation image after the trigger (trigger-only
// specs use the recorded trigger regions; benign images have none).
MetricsReport evaluate_full(const det::DetectorParams& params, const poison::EvalSplits& splits,
                            const EvalConfig& cfg);

std::vector<DetList> detect_all(const det::DetectorParams& params, std::span<const Image> images,
                                double conf, double nms_iou);

struct ScoreBuckets {
  double low = 0, mid = 0, high = 0;  // percent of cells in [0,0.1], (0.1,0.5], (0.5,1]
  std::size_t cells = 0;
};
ScoreBuckets scoreb_buckets(const det::DetectorParams& params, const Dataset& dataset, int target_class);
ScoreBuckets scoreb_buckets(std::span<const std::vector<double>> heads, const det::DetectorConfig& cfg,
                            int target_class);

}  // namespace rba::eval

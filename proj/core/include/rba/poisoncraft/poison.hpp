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
#include <optional>
#include <string>
#include <vector>

#include "rba/dataset.hpp"
#include "rba/detector/boxes.hpp"
#include "rba/image.hpp"

namespace rba::poison {

enum class TriggerMode { kVariable, kFixed };
enum class Placement { kCenter, kOffset };

// Trigger bitmap plus how it is sized, placed and blended.
struct TriggerSpec {
  Image bitmap;         // x_t, RGB in [0,1]
  double lambda = 1.0;  // transparency
  double rho_w = 0.4;   // trigger size / object size (variable mode)
  double rho_h = 0.4;
  Placement placement = Placement::kCenter;
  double offset_dx = 0.0;  // offset placement, fractions of the object box
  double offset_dy = 0.0;
  TriggerMode mode = TriggerMode::kVariable;
  int fixed_w = 0;  // pixels (fixed mode)
  int fixed_h = 0;
  bool bilinear = true;

  void validate(int image_h, int image_w) const;
};

// Deterministic 16x16 high-contrast pattern used when no bitmap is supplied.
Image default_trigger();

// Pixel rectangle [x0, x0+w) x [y0, y0+h).
struct PixelRect {
  int x0 = 0, y0 = 0, w = 0, h = 0;
  bool contains(int x, int y) const { return x >= x0 && x < x0 + w && y >= y0 && y < y0 + h; }
  bool operator==(const PixelRect&) const = default;
};

struct TriggerPlacement {
  det::Box region;  // P_t, normalized center form of `pixels`
  PixelRect pixels;
  bool shrunk = false;  // clipped to the object box / image
};

struct ApplyResult {
  Image image;
  std::optional<TriggerPlacement> placement;  // empty when the trigger was skipped
  std::string warning;
};

// Trigger scaled to rho * object size, blended as (1 - lambda) x + lambda x_t
// inside P_t; pixels outside P_t are untouched.
ApplyResult apply_trigger_variable(const Image& image, const det::Annotation& ann,
                                   const TriggerSpec& spec);
// Fixed pixel-size trigger at the box center, blended as x - lambda (x - x_t).
ApplyResult apply_trigger_fixed(const Image& image, const det::Annotation& ann,
                                const TriggerSpec& spec);
ApplyResult apply_trigger(const Image& image, const det::Annotation& ann, const TriggerSpec& spec);

enum class LabelRule { kRemove, kRelabel };

struct PoisonConfig {
  int target_class = 0;
  double rate = 0.1;  // Poi target
  LabelRule rule = LabelRule::kRemove;
  int relabel_class = 0;  // kRelabel only
  det::Box relabel_box;   // kRelabel only; must be a valid box
  bool all_object_attack = false;
  std::uint64_t seed = 0;

  void validate() const;
};

// One attacked object.
struct PoisonedObject {
  std::int64_t ann_id = 0;
  det::Annotation original;
  TriggerPlacement trigger;
};

struct ImageProvenance {
  std::int64_t image_id = 0;
  std::vector<PoisonedObject> objects;
  std::vector<std::string> warnings;
};

struct PoisonReport {
  double target_rate = 0;
  double achieved_rate = 0;  // poisoned boxes / all boxes
  std::size_t total_boxes = 0;
  std::size_t target_boxes = 0;
  std::size_t poisoned_boxes = 0;
  std::size_t poisoned_images = 0;
  std::vector<ImageProvenance> images;  // dataset order
  std::vector<std::string> warnings;
};

struct PoisonResult {
  Dataset dataset;  // original order; selected images replaced by (x_hat, y_hat)
  PoisonReport report;
};

// Selects whole images holding target-class boxes (seeded) so that the
// achieved rate is the largest reachable value <= cfg.rate, then triggers and
// relabels every target box in them.
PoisonResult poison_dataset(const Dataset& dataset, const TriggerSpec& spec, const PoisonConfig& cfg);

// Poisons every target object of one image; non-target annotations are kept.
struct PoisonedImage {
  Sample sample;
  ImageProvenance provenance;
};
PoisonedImage poison_image(const Sample& sample, const TriggerSpec& spec, const PoisonConfig& cfg);

// Training view of one poisoned image: (x_hat, y_hat) plus the clean pair and
// trigger regions.
struct PoisonedSample {
  Sample poisoned;
  Image clean_image;
  std::vector<det::Annotation> clean_anns;
  std::vector<PixelRect> regions;
};

// Splits a poisoning result back into D_c and D_p, given the pre-poison data.
struct TrainingSplit {
  Dataset clean;
  std::vector<PoisonedSample> poisoned;
};
TrainingSplit split_for_training(const Dataset& original, const PoisonResult& result);

struct AttackedObject {
  std::size_t image_index = 0;  // into EvalSplits::attacked
  det::Annotation original;
  PixelRect trigger;
};

struct EvalSplits {
  Dataset benign;    // D_val,b
  Dataset attacked;  // D_val,a (target objects triggered and relabeled)
  std::vector<AttackedObject> attacked_objects;
  std::vector<std::vector<PixelRect>> attacked_regions;  // per attacked image
  std::vector<std::size_t> attacked_source;              // index into the val set

  Dataset merged() const;  // D_val,a+b = benign followed by attacked
};

EvalSplits build_eval_splits(const Dataset& val, const TriggerSpec& spec, const PoisonConfig& cfg);

std::string report_to_json(const PoisonReport& report);
PoisonReport report_from_json(const std::string& text);

}  // namespace rba::poison

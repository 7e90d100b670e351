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
#include <cstdint>
#include <string>

#include "rba/dataset.hpp"

namespace rba::synth {

enum ShapeClass : int { kCircle = 0, kSquare = 1, kTriangle = 2, kCross = 3 };
inline constexpr int kNumClasses = 4;
inline const std::array<std::string, kNumClasses> kClassNames{"circle", "square", "triangle", "cross"};

struct SceneSpec {
  int image_side = 64;
  int min_objects = 1;
  int max_objects = 3;
  double min_size = 0.15;  // fraction of image_side
  double max_size = 0.5;
  std::array<double, kNumClasses> class_weights{0.55, 0.15, 0.15, 0.15};
  double max_pair_iou = 0.3;
  int max_attempts = 100;
  int supersample = 4;

  void validate() const;
};

// One scene; boxes are integer pixel rectangles converted to center form.
Sample render_scene(const SceneSpec& spec, std::uint64_t seed, std::int64_t image_id,
                    std::int64_t first_ann_id);

Dataset generate(const SceneSpec& spec, int count, std::uint64_t seed, std::int64_t first_image_id = 0);

struct SyntheticSet {
  Dataset train;
  Dataset val;
};
// Train and val come from independent seed streams; val ids follow train ids.
SyntheticSet generate_synthetic(const SceneSpec& spec, int n_train, int n_val, std::uint64_t seed);

}  // namespace rba::synth

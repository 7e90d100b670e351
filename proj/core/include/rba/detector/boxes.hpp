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

#include <span>
#include <vector>

#include "rba/gradcore/tensor.hpp"

namespace rba::det {

// Normalized center-form box [x_center, y_center, w, h] in [0,1] image units.
struct Box {
  double xc = 0, yc = 0, w = 0, h = 0;

  double x1() const { return xc - w / 2; }
  double y1() const { return yc - h / 2; }
  double x2() const { return xc + w / 2; }
  double y2() const { return yc + h / 2; }
  double area() const { return w * h; }
  bool operator==(const Box&) const = default;
};

// One ground-truth object.
struct Annotation {
  int cls = 0;
  Box box;
  bool operator==(const Annotation&) const = default;
};

struct Detection {
  int cls = 0;
  double score = 0;  // Score_B
  Box box;
  int cell = 0;  // flat grid index gy * S + gx; NMS tie-breaker
};

double iou(const Box& a, const Box& b);

// Throws ConfigError unless 0 <= center <= 1, 0 < w,h <= 1 and the box lies
// within the image (1e-9 slack).
void validate_annotation(const Annotation& a, int num_classes);

// Complete-IoU loss per row of `pred` ([N,4], center form), averaged over N:
//   1 - IoU + |c_p - c_g|^2 / diag^2 + alpha * v,
//   v = 4/pi^2 (atan(w_g/h_g) - atan(w_p/h_p))^2, alpha = v / ((1 - IoU) + v + 1e-9).
// alpha is not detached. Zero-area ground truth throws ConfigError.
grad::Tensor ciou_loss(const grad::Tensor& pred, std::span<const Box> gt);

}  // namespace rba::det

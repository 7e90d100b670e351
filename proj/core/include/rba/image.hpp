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

#include <cstddef>
#include <vector>

#include "rba/gradcore/tensor.hpp"

namespace rba {

// H x W x 3 image with channel values in [0,1], stored row-major HWC.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> px;

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), px(static_cast<std::size_t>(h) * w * 3, fill) {}

  double& at(int y, int x, int c) { return px[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const {
    return px[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  bool operator==(const Image&) const = default;
};

// [3,H,W] tensor view of an image (copy).
grad::Tensor to_chw(const Image& img, bool requires_grad = false);
// Inverse of to_chw; values are not clamped.
Image from_chw(const grad::Tensor& t);

// Round every channel to the nearest k/255 level, the precision PNG stores.
void quantize_u8(Image& img);

}  // namespace rba

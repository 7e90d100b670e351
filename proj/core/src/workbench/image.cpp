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

#include <algorithm>
#include <cmath>

#include "rba/errors.hpp"
#include "rba/image.hpp"

namespace rba {

grad::Tensor to_chw(const Image& img, bool requires_grad) {
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  std::vector<double> v(plane * 3);
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) v[c * plane + i] = img.px[i * 3 + c];
  }
  return grad::Tensor::from({3, img.height, img.width}, std::move(v), requires_grad);
}

Image from_chw(const grad::Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 3) throw ConfigError("from_chw: expected [3,H,W]");
  Image img(t.dim(1), t.dim(2));
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  const auto v = t.data();
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) img.px[i * 3 + c] = v[c * plane + i];
  }
  return img;
}

void quantize_u8(Image& img) {
  for (double& v : img.px) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

}  // namespace rba

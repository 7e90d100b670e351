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

#include "rba/detector/boxes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rba/errors.hpp"
#include "rba/gradcore/ops.hpp"

namespace rba::det {

double iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1()));
  const double ih = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1()));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

void validate_annotation(const Annotation& a, int num_classes) {
  constexpr double kSlack = 1e-9;
  const Box& b = a.box;
  if (a.cls < 0 || a.cls >= num_classes) {
    throw ConfigError("annotation class " + std::to_string(a.cls) + " out of range");
  }
  if (!(b.xc >= 0 && b.xc <= 1 && b.yc >= 0 && b.yc <= 1)) {
    throw ConfigError("annotation center outside the image");
  }
  if (!(b.w > 0 && b.w <= 1 && b.h > 0 && b.h <= 1)) {
    throw ConfigError("annotation size outside (0,1]");
  }
  if (b.x1() < -kSlack || b.y1() < -kSlack || b.x2() > 1 + kSlack || b.y2() > 1 + kSlack) {
    throw ConfigError("annotation box extends outside the image");
  }
}

grad::Tensor ciou_loss(const grad::Tensor& pred, std::span<const Box> gt) {
  using grad::Tensor;
  if (pred.rank() != 2 || pred.dim(1) != 4) throw ConfigError("ciou_loss: pred must be [N,4]");
  const int n = pred.dim(0);
  if (static_cast<std::size_t>(n) != gt.size() || n == 0) {
    throw ConfigError("ciou_loss: pred/gt count mismatch");
  }

  auto column = [&](int j) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[i] = 4 * i + j;
    return grad::gather(pred, std::move(idx), {n});
  };
  auto constant = [&](auto field) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[i] = field(gt[i]);
    return Tensor::from({n}, std::move(v));
  };
  for (const Box& g : gt) {
    if (!(g.w > 0 && g.h > 0)) throw ConfigError("ciou_loss: degenerate ground-truth box");
  }

  Tensor pcx = column(0), pcy = column(1), pw = column(2), ph = column(3);
  Tensor hw = grad::mul_scalar(pw, 0.5), hh = grad::mul_scalar(ph, 0.5);
  Tensor px1 = pcx - hw, px2 = pcx + hw, py1 = pcy - hh, py2 = pcy + hh;

  Tensor gcx = constant([](const Box& b) { return b.xc; });
  Tensor gcy = constant([](const Box& b) { return b.yc; });
  Tensor gx1 = constant([](const Box& b) { return b.x1(); });
  Tensor gx2 = constant([](const Box& b) { return b.x2(); });
  Tensor gy1 = constant([](const Box& b) { return b.y1(); });
  Tensor gy2 = constant([](const Box& b) { return b.y2(); });
  Tensor garea = constant([](const Box& b) { return b.area(); });
  Tensor gatan = constant([](const Box& b) { return std::atan(b.w / b.h); });
  Tensor zero = Tensor::zeros({n});

  Tensor iw = grad::maximum(grad::minimum(px2, gx2) - grad::maximum(px1, gx1), zero);
  Tensor ih = grad::maximum(grad::minimum(py2, gy2) - grad::maximum(py1, gy1), zero);
  Tensor inter = iw * ih;
  Tensor uni = pw * ph + garea - inter;
  Tensor iou_t = inter / uni;

  Tensor rho2 = grad::square(pcx - gcx) + grad::square(pcy - gcy);
  Tensor cw = grad::maximum(px2, gx2) - grad::minimum(px1, gx1);
  Tensor ch = grad::maximum(py2, gy2) - grad::minimum(py1, gy1);
  Tensor diag2 = grad::square(cw) + grad::square(ch);

  const double k = 4.0 / (std::numbers::pi * std::numbers::pi);
  Tensor v = grad::mul_scalar(grad::square(gatan - grad::atan(pw / ph)), k);
  Tensor one_minus_iou = grad::add_scalar(grad::neg(iou_t), 1.0);
  Tensor alpha = v / grad::add_scalar(one_minus_iou + v, 1e-9);

  Tensor per_box = one_minus_iou + rho2 / diag2 + alpha * v;
  return grad::mean(per_box);
}

}  // namespace rba::det

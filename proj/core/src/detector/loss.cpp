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

#include "rba/detector/detector.hpp"
#include "rba/errors.hpp"
#include "rba/gradcore/ops.hpp"

namespace rba::det {

std::vector<CellTarget> assign_targets(std::span<const Annotation> anns, const DetectorConfig& cfg) {
  const int s = cfg.grid_side();
  std::vector<CellTarget> out;
  std::vector<bool> taken(static_cast<std::size_t>(s) * s, false);
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const Box& b = anns[i].box;
    const int gx = std::min(s - 1, static_cast<int>(std::floor(b.xc * s)));
    const int gy = std::min(s - 1, static_cast<int>(std::floor(b.yc * s)));
    const int cell = gy * s + gx;
    if (taken[cell]) continue;
    taken[cell] = true;
    out.push_back({cell, static_cast<int>(i)});
  }
  return out;
}

DetectionLoss detection_loss(const grad::Tensor& head, std::span<const Annotation> anns,
                             const DetectorConfig& cfg, const LossWeights& w) {
  using grad::Tensor;
  const int s = cfg.grid_side();
  const int k = cfg.head_channels();
  const int cells = s * s;
  if (head.rank() != 3 || head.dim(0) != s || head.dim(1) != s || head.dim(2) != k) {
    throw ConfigError("detection_loss: head shape does not match the detector config");
  }
  if (w.cls < 0 || w.box < 0 || w.obj < 0) throw ConfigError("detection_loss: negative weight");
  for (const auto& a : anns) validate_annotation(a, cfg.num_classes);

  const auto targets = assign_targets(anns, cfg);

  // Objectness over every cell.
  std::vector<std::int64_t> obj_idx(static_cast<std::size_t>(cells));
  std::vector<double> obj_t(static_cast<std::size_t>(cells), 0.0);
  for (int c = 0; c < cells; ++c) obj_idx[c] = static_cast<std::int64_t>(c) * k + kObj;
  for (const auto& t : targets) obj_t[t.cell] = 1.0;
  Tensor obj_pred = grad::sigmoid(grad::gather(head, std::move(obj_idx), {cells}));
  Tensor l_obj = grad::bce(obj_pred, Tensor::from({cells}, std::move(obj_t)));

  Tensor l_cls = Tensor::scalar(0.0);
  Tensor l_box = Tensor::scalar(0.0);
  if (!targets.empty()) {
    const int p = static_cast<int>(targets.size());
    const int nc = cfg.num_classes;
    std::vector<std::int64_t> cls_idx;
    std::vector<double> cls_t;
    std::vector<std::int64_t> txy_idx, twh_idx;
    std::vector<double> offsets;
    std::vector<Box> gt;
    for (const auto& t : targets) {
      const std::int64_t base = static_cast<std::int64_t>(t.cell) * k;
      const int label = anns[t.annotation].cls;
      for (int c = 0; c < nc; ++c) {
        cls_idx.push_back(base + kCls0 + c);
        cls_t.push_back(c == label ? 1.0 : 0.0);
      }
      txy_idx.push_back(base + kTx);
      txy_idx.push_back(base + kTy);
      twh_idx.push_back(base + kTw);
      twh_idx.push_back(base + kTh);
      offsets.push_back(t.cell % s);
      offsets.push_back(t.cell / s);
      gt.push_back(anns[t.annotation].box);
    }
    Tensor cls_pred = grad::sigmoid(grad::gather(head, std::move(cls_idx), {p * nc}));
    l_cls = grad::bce(cls_pred, Tensor::from({p * nc}, std::move(cls_t)));

    // Row-interleaved [cx, cy] and [w, h] pairs, then stitched into [P,4].
    Tensor centers = grad::mul_scalar(
        grad::add(grad::sigmoid(grad::gather(head, std::move(txy_idx), {p * 2})),
                  Tensor::from({p * 2}, std::move(offsets))),
        1.0 / s);
    std::vector<double> anchor(static_cast<std::size_t>(p) * 2);
    for (int i = 0; i < p; ++i) {
      anchor[2 * i] = cfg.anchor_w;
      anchor[2 * i + 1] = cfg.anchor_h;
    }
    Tensor sizes = grad::mul(grad::exp(grad::gather(head, std::move(twh_idx), {p * 2})),
                             Tensor::from({p * 2}, std::move(anchor)));
    Tensor both = grad::concat({centers, sizes});
    std::vector<std::int64_t> rows;
    for (int i = 0; i < p; ++i) {
      rows.push_back(2 * i);
      rows.push_back(2 * i + 1);
      rows.push_back(2 * p + 2 * i);
      rows.push_back(2 * p + 2 * i + 1);
    }
    Tensor pred_boxes = grad::gather(both, std::move(rows), {p, 4});
    l_box = ciou_loss(pred_boxes, gt);
  }

  Tensor total = grad::add(grad::add(grad::mul_scalar(l_cls, w.cls), grad::mul_scalar(l_box, w.box)),
                           grad::mul_scalar(l_obj, w.obj));
  return {total, l_cls, l_box, l_obj};
}

}  // namespace rba::det

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
#include "rba/gradcore/ops.hpp"
#include "rba/madtrain/train.hpp"

namespace rba::mad {
namespace {

using grad::Tensor;

std::vector<double> layer_weights(const AttackBudget& b, const det::DetectorConfig& cfg) {
  if (cfg.taps.size() != 3) throw ConfigError("feature loss expects exactly three tap layers");
  return {b.beta3, b.beta5, b.beta7};
}

// sigmoid(f_L(baseline)) per tap, as constants.
std::vector<Tensor> baseline_targets(const det::DetectorParams& frozen, const Image& baseline) {
  const det::ForwardResult fr = det::forward(frozen, baseline);
  std::vector<Tensor> out;
  for (const auto& t : fr.taps) out.push_back(grad::sigmoid(t).detach());
  return out;
}

Tensor objective(const det::DetectorParams& frozen, const Tensor& input,
                 const std::vector<Tensor>& targets, std::span<const det::Annotation> y,
                 const AttackBudget& b, const det::LossWeights& w) {
  const det::ForwardResult fr = det::forward(frozen, input);
  Tensor j = Tensor::scalar(0.0);
  if (b.use_lv) {
    const auto beta = layer_weights(b, frozen.config);
    for (std::size_t i = 0; i < fr.taps.size(); ++i) {
      j = j + grad::mul_scalar(grad::bce(grad::sigmoid(fr.taps[i]), targets[i]), beta[i]);
    }
  }
  if (b.use_ly) j = j - det::detection_loss(fr.head, y, frozen.config, w).total;
  return j;
}

}  // namespace

Image add_delta(const Image& x, std::span<const double> delta) {
  if (delta.size() != x.px.size()) throw ConfigError("perturbation size does not match the image");
  Image out = x;
  for (std::size_t i = 0; i < delta.size(); ++i) out.px[i] = std::clamp(x.px[i] + delta[i], 0.0, 1.0);
  return out;
}

double craft_objective(const det::DetectorParams& params, const Image& x_hat, const Image& x_clean,
                       std::span<const det::Annotation> y_clean, std::span<const double> delta,
                       const AttackBudget& budget, const det::LossWeights& weights) {
  const det::DetectorParams frozen = params.clone(false);
  const auto targets =
      baseline_targets(frozen, budget.baseline == Baseline::kClean ? x_clean : x_hat);
  return objective(frozen, to_chw(add_delta(x_hat, delta)), targets, y_clean, budget, weights).item();
}

CraftResult craft_physical_noise(const det::DetectorParams& params, const Image& x_hat,
                                 const Image& x_clean, std::span<const det::Annotation> y_clean,
                                 std::span<const poison::PixelRect> regions,
                                 const AttackBudget& budget, const det::LossWeights& weights) {
  budget.validate();
  if (regions.empty()) throw ConfigError("craft_physical_noise: no trigger regions");
  if (x_clean.height != x_hat.height || x_clean.width != x_hat.width) {
    throw ConfigError("craft_physical_noise: clean and poisoned images differ in size");
  }
  const int H = x_hat.height, W = x_hat.width;
  CraftResult res;
  res.delta.assign(x_hat.px.size(), 0.0);
  if (budget.epsilon == 0.0 || budget.eta == 0.0) return res;

  std::vector<char> mask(static_cast<std::size_t>(H) * W, 0);
  for (const auto& r : regions) {
    for (int y = std::max(0, r.y0); y < std::min(H, r.y0 + r.h); ++y) {
      for (int x = std::max(0, r.x0); x < std::min(W, r.x0 + r.w); ++x) mask[y * W + x] = 1;
    }
  }

  const det::DetectorParams frozen = params.clone(false);
  const auto targets =
      baseline_targets(frozen, budget.baseline == Baseline::kClean ? x_clean : x_hat);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  bool any_grad = false;

  for (int t = 0; t < budget.steps; ++t) {
    Tensor input = to_chw(add_delta(x_hat, res.delta), true);
    Tensor j = objective(frozen, input, targets, y_clean, budget, weights);
    res.objective.push_back(j.item());
    grad::backward(j);
    std::span<const double> g = input.grad();
    if (g.empty()) continue;
    for (std::size_t p = 0; p < plane; ++p) {
      if (!mask[p]) continue;
      for (int c = 0; c < 3; ++c) {
        const double gi = g[c * plane + p];
        if (gi == 0.0) continue;
        any_grad = true;
        double& d = res.delta[p * 3 + c];
        const double base = x_hat.px[p * 3 + c];
        d += gi > 0 ? budget.eta : -budget.eta;
        d = std::clamp(d, -budget.epsilon, budget.epsilon);
        d = std::clamp(base + d, 0.0, 1.0) - base;
      }
    }
  }
  if (!any_grad) {
    res.degenerate = true;
    std::fill(res.delta.begin(), res.delta.end(), 0.0);
  }
  res.objective.push_back(
      objective(frozen, to_chw(add_delta(x_hat, res.delta)), targets, y_clean, budget, weights)
          .item());
  return res;
}

}  // namespace rba::mad

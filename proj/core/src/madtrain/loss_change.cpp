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
#include <limits>

#include "rba/errors.hpp"
#include "rba/madtrain/train.hpp"

namespace rba::mad {

double sample_loss(const det::DetectorParams& params, const Image& image,
                   std::span<const det::Annotation> anns, const det::LossWeights& weights) {
  const det::ForwardResult fr = det::forward(params, image);
  return det::detection_loss(fr.head, anns, params.config, weights).total.item();
}

std::string loss_set_name(LossSet s) {
  switch (s) {
    case LossSet::kClean:
      return "clean";
    case LossSet::kPoisoned:
      return "poisoned";
    case LossSet::kPoisonedNoise:
      return "poisoned_noise";
  }
  return "?";
}

std::vector<LossChangeRow> loss_change_report(const det::DetectorParams& before,
                                              const det::DetectorParams& after,
                                              const LossChangeInputs& inputs,
                                              const det::LossWeights& weights) {
  if (before.config != after.config) {
    throw ConfigError("loss_change_report: models use different architectures");
  }
  const det::DetectorParams b = before.clone(false), a = after.clone(false);
  std::vector<LossChangeRow> rows;
  auto run = [&](const std::vector<LabeledImage>& set, LossSet tag) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      rows.push_back({tag, i, sample_loss(b, set[i].image, set[i].anns, weights),
                      sample_loss(a, set[i].image, set[i].anns, weights)});
    }
  };
  run(inputs.clean, LossSet::kClean);
  run(inputs.poisoned, LossSet::kPoisoned);
  run(inputs.poisoned_noise, LossSet::kPoisonedNoise);
  return rows;
}

double median_delta(std::span<const LossChangeRow> rows, LossSet set) {
  std::vector<double> d;
  for (const auto& r : rows) {
    if (r.set == set) d.push_back(r.delta());
  }
  if (d.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size() / 2;
  return d.size() % 2 ? d[m] : 0.5 * (d[m - 1] + d[m]);
}

}  // namespace rba::mad

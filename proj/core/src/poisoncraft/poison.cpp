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

#include "rba/poisoncraft/poison.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "rba/errors.hpp"

namespace rba::poison {
namespace {

bool is_target(const det::Annotation& a, const PoisonConfig& cfg) {
  return cfg.all_object_attack || a.cls == cfg.target_class;
}

std::size_t count_targets(const Sample& s, const PoisonConfig& cfg) {
  return static_cast<std::size_t>(
      std::count_if(s.anns.begin(), s.anns.end(), [&](const auto& a) { return is_target(a, cfg); }));
}

std::int64_t ann_id_of(const Sample& s, std::size_t i) {
  return i < s.ann_ids.size() ? s.ann_ids[i] : static_cast<std::int64_t>(i);
}

// 0/1 subset sum over `weights` (in priority order): returns the chosen item
// indices reaching the largest total <= cap, preferring earlier items.
std::vector<std::size_t> pick_subset(const std::vector<std::size_t>& weights, std::size_t cap) {
  const std::size_t n = weights.size();
  // suffix[i][s]: total s reachable using items i..n-1.
  std::vector<std::vector<char>> suffix(n + 1, std::vector<char>(cap + 1, 0));
  suffix[n][0] = 1;
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t s = 0; s <= cap; ++s) {
      suffix[i][s] = suffix[i + 1][s] || (s >= weights[i] && suffix[i + 1][s - weights[i]]);
    }
  }
  std::size_t best = cap;
  while (best > 0 && !suffix[0][best]) --best;
  std::vector<std::size_t> chosen;
  std::size_t rem = best;
  for (std::size_t i = 0; i < n && rem > 0; ++i) {
    if (weights[i] <= rem && suffix[i + 1][rem - weights[i]]) {
      chosen.push_back(i);
      rem -= weights[i];
    }
  }
  return chosen;
}

}  // namespace

void PoisonConfig::validate() const {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("poison rate must lie in [0,1]");
  if (!all_object_attack && target_class < 0) throw ConfigError("target class must be >= 0");
  if (rule == LabelRule::kRelabel) {
    const det::Box& b = relabel_box;
    if (b == det::Box{}) {
      throw ConfigError("relabel box [0,0,0,0] is reserved for the removal rule");
    }
    det::validate_annotation({relabel_class, b}, relabel_class + 1);
  }
}

PoisonedImage poison_image(const Sample& sample, const TriggerSpec& spec, const PoisonConfig& cfg) {
  PoisonedImage out;
  out.sample = sample;
  out.sample.anns.clear();
  out.sample.ann_ids.clear();
  out.provenance.image_id = sample.image_id;

  Image img = sample.image;
  for (std::size_t i = 0; i < sample.anns.size(); ++i) {
    const det::Annotation& a = sample.anns[i];
    const std::int64_t id = ann_id_of(sample, i);
    if (!is_target(a, cfg)) {
      out.sample.anns.push_back(a);
      out.sample.ann_ids.push_back(id);
      continue;
    }
    ApplyResult r = apply_trigger(img, a, spec);
    if (!r.warning.empty()) {
      out.provenance.warnings.push_back("annotation " + std::to_string(id) + ": " + r.warning);
    }
    if (!r.placement) {
      out.sample.anns.push_back(a);
      out.sample.ann_ids.push_back(id);
      continue;
    }
    img = std::move(r.image);
    out.provenance.objects.push_back({id, a, *r.placement});
    if (cfg.rule == LabelRule::kRelabel) {
      out.sample.anns.push_back({cfg.relabel_class, cfg.relabel_box});
      out.sample.ann_ids.push_back(id);
    }
  }
  out.sample.image = std::move(img);
  return out;
}

PoisonResult poison_dataset(const Dataset& dataset, const TriggerSpec& spec, const PoisonConfig& cfg) {
  cfg.validate();
  PoisonResult res;
  PoisonReport& rep = res.report;
  rep.target_rate = cfg.rate;
  rep.total_boxes = count_boxes(dataset);

  std::vector<std::size_t> candidates;
  std::vector<std::size_t> per_image(dataset.size(), 0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    per_image[i] = count_targets(dataset[i], cfg);
    rep.target_boxes += per_image[i];
    if (per_image[i] > 0) candidates.push_back(i);
  }
  if (cfg.rate > 0) {
    const double max_rate =
        rep.total_boxes ? static_cast<double>(rep.target_boxes) / rep.total_boxes : 0.0;
    if (cfg.rate > max_rate + 1e-12) {
      std::ostringstream os;
      os << "poison rate " << cfg.rate << " is not achievable: the dataset holds "
         << rep.target_boxes << " target boxes out of " << rep.total_boxes
         << ", so the maximum achievable rate is " << max_rate;
      throw ConfigError(os.str());
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  const auto cap = static_cast<std::size_t>(std::floor(cfg.rate * rep.total_boxes + 1e-9));
  std::vector<std::size_t> weights;
  for (std::size_t c : candidates) weights.push_back(per_image[c]);
  std::vector<bool> selected(dataset.size(), false);
  for (std::size_t k : pick_subset(weights, cap)) selected[candidates[k]] = true;

  res.dataset.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!selected[i]) {
      res.dataset.push_back(dataset[i]);
      continue;
    }
    PoisonedImage p = poison_image(dataset[i], spec, cfg);
    rep.poisoned_boxes += p.provenance.objects.size();
    ++rep.poisoned_images;
    for (const auto& w : p.provenance.warnings) {
      rep.warnings.push_back("image " + std::to_string(dataset[i].image_id) + ": " + w);
    }
    res.dataset.push_back(std::move(p.sample));
    rep.images.push_back(std::move(p.provenance));
  }
  rep.achieved_rate =
      rep.total_boxes ? static_cast<double>(rep.poisoned_boxes) / rep.total_boxes : 0.0;
  return res;
}

TrainingSplit split_for_training(const Dataset& original, const PoisonResult& result) {
  if (original.size() != result.dataset.size()) {
    throw ConfigError("split_for_training: dataset size mismatch");
  }
  TrainingSplit out;
  std::size_t next = 0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const bool poisoned = next < result.report.images.size() &&
                          result.report.images[next].image_id == original[i].image_id;
    if (!poisoned) {
      out.clean.push_back(result.dataset[i]);
      continue;
    }
    const ImageProvenance& prov = result.report.images[next++];
    PoisonedSample ps;
    ps.poisoned = result.dataset[i];
    ps.clean_image = original[i].image;
    ps.clean_anns = original[i].anns;
    for (const auto& o : prov.objects) ps.regions.push_back(o.trigger.pixels);
    out.poisoned.push_back(std::move(ps));
  }
  if (next != result.report.images.size()) {
    throw ConfigError("split_for_training: provenance does not follow dataset order");
  }
  return out;
}

Dataset EvalSplits::merged() const {
  Dataset d = benign;
  d.insert(d.end(), attacked.begin(), attacked.end());
  return d;
}

EvalSplits build_eval_splits(const Dataset& val, const TriggerSpec& spec, const PoisonConfig& cfg) {
  EvalSplits s;
  s.benign = val;
  for (const Sample& smp : val) {
    if (count_targets(smp, cfg) == 0) continue;
    PoisonedImage p = poison_image(smp, spec, cfg);
    if (p.provenance.objects.empty()) continue;
    const std::size_t idx = s.attacked.size();
    std::vector<PixelRect> regions;
    for (const auto& o : p.provenance.objects) {
      s.attacked_objects.push_back({idx, o.original, o.trigger.pixels});
      regions.push_back(o.trigger.pixels);
    }
    s.attacked.push_back(std::move(p.sample));
    s.attacked_regions.push_back(std::move(regions));
    s.attacked_source.push_back(static_cast<std::size_t>(&smp - val.data()));
  }
  return s;
}

}  // namespace rba::poison

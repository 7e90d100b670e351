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


#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "../common/oracles.hpp"
#include "rba/errors.hpp"
#include "rba/poisoncraft/poison.hpp"
#include "rba/workbench/synth.hpp"

namespace {

using namespace rba;
using det::Annotation;
using poison::TriggerSpec;

Image gray(double v) { return Image(64, 64, v); }

Image random_image(std::mt19937_64& rng) {
  Image img(64, 64);
  img.px = oracle::uniform(img.px.size(), rng, 0, 1);
  return img;
}

TriggerSpec spec_with(double lambda) {
  TriggerSpec s;
  s.bitmap = poison::default_trigger();
  s.lambda = lambda;
  return s;
}

int differing_pixels(const Image& a, const Image& b) {
  int n = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      bool d = false;
      for (int c = 0; c < 3; ++c) d = d || a.at(y, x, c) != b.at(y, x, c);
      n += d;
    }
  return n;
}

// Box whose variable-size trigger is exactly 16x16 (the bitmap size).
const Annotation kExact{0, {0.5, 0.5, 0.625, 0.625}};

TEST(DefaultTrigger, IsSixteenSquareAndDeterministic) {
  const Image t = poison::default_trigger();
  EXPECT_EQ(t.height, 16);
  EXPECT_EQ(t.width, 16);
  EXPECT_EQ(t, poison::default_trigger());
}

TEST(VariableTrigger, ZeroLambdaIsIdentity) {
  std::mt19937_64 rng(1);
  const Image img = random_image(rng);
  const auto r = poison::apply_trigger_variable(img, kExact, spec_with(0.0));
  EXPECT_EQ(r.image, img);
  ASSERT_TRUE(r.placement.has_value());
  EXPECT_EQ(r.placement->pixels, (poison::PixelRect{24, 24, 16, 16}));
}

TEST(VariableTrigger, FullLambdaReplacesRegion) {
  std::mt19937_64 rng(2);
  const Image img = random_image(rng), t = poison::default_trigger();
  const auto r = poison::apply_trigger_variable(img, kExact, spec_with(1.0));
  const auto& p = r.placement->pixels;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) {
        if (p.contains(x, y)) {
          EXPECT_NEAR(r.image.at(y, x, c), t.at(y - p.y0, x - p.x0, c), 1e-12);
        } else {
          EXPECT_EQ(r.image.at(y, x, c), img.at(y, x, c));
        }
      }
}

TEST(VariableTrigger, HalfLambdaOnGrayMatchesBlend) {
  const Image img = gray(0.4), t = poison::default_trigger();
  const auto r = poison::apply_trigger_variable(img, kExact, spec_with(0.5));
  const auto& p = r.placement->pixels;
  for (int y = p.y0; y < p.y0 + p.h; ++y)
    for (int x = p.x0; x < p.x0 + p.w; ++x)
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(r.image.at(y, x, c), 0.5 * 0.4 + 0.5 * t.at(y - p.y0, x - p.x0, c), 1e-12);
}

TEST(VariableTrigger, BlendIsLinearInLambdaOnRandomInstances) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lam(0, 1);
  for (int trial = 0; trial < 60; ++trial) {
    const Image img = random_image(rng);
    const Annotation a{0, oracle::random_box(rng, 0.2, 0.6)};
    const double l = lam(rng);
    const auto full = poison::apply_trigger_variable(img, a, spec_with(1.0));
    const auto part = poison::apply_trigger_variable(img, a, spec_with(l));
    ASSERT_EQ(full.placement.has_value(), part.placement.has_value());
    if (!full.placement) continue;
    for (std::size_t i = 0; i < img.px.size(); ++i) {
      EXPECT_NEAR(part.image.px[i], (1 - l) * img.px[i] + l * full.image.px[i], 1e-12);
    }
  }
}

TEST(VariableTrigger, RegionScalesWithObject) {
  const auto small = poison::apply_trigger_variable(gray(0.5), {0, {0.5, 0.5, 0.2, 0.2}}, spec_with(1));
  const auto large = poison::apply_trigger_variable(gray(0.5), {0, {0.5, 0.5, 0.5, 0.5}}, spec_with(1));
  EXPECT_LT(small.placement->pixels.w, large.placement->pixels.w);
  EXPECT_EQ(large.placement->pixels.w, 13);  // round(0.4 * 0.5 * 64)
}

TEST(VariableTrigger, TooSmallObjectIsSkipped) {
  const auto r = poison::apply_trigger_variable(gray(0.5), {0, {0.5, 0.5, 0.01, 0.01}}, spec_with(1));
  EXPECT_FALSE(r.placement.has_value());
  EXPECT_FALSE(r.warning.empty());
  EXPECT_EQ(r.image, gray(0.5));
}

TEST(FixedTrigger, ZeroLambdaIsIdentity) {
  TriggerSpec s = spec_with(0);
  s.mode = poison::TriggerMode::kFixed;
  s.fixed_w = s.fixed_h = 20;
  EXPECT_EQ(poison::apply_trigger_fixed(gray(0.3), kExact, s).image, gray(0.3));
}

TEST(FixedTrigger, TwentySquareChangesFourHundredPixels) {
  TriggerSpec s = spec_with(1);
  s.mode = poison::TriggerMode::kFixed;
  s.fixed_w = s.fixed_h = 20;
  // 0.123 never occurs in the high-contrast bitmap, so every covered pixel changes.
  const auto r = poison::apply_trigger_fixed(gray(0.123), kExact, s);
  EXPECT_EQ(differing_pixels(r.image, gray(0.123)), 400);
  EXPECT_FALSE(r.placement->shrunk);
}

TEST(FixedTrigger, BothBlendFormsAgree) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> lam(0, 1);
  for (int trial = 0; trial < 60; ++trial) {
    const Image img = random_image(rng);
    const Annotation a{0, oracle::random_box(rng, 0.3, 0.6)};
    TriggerSpec v = spec_with(lam(rng));
    const auto var = poison::apply_trigger_variable(img, a, v);
    if (!var.placement || var.placement->shrunk) continue;
    TriggerSpec f = v;
    f.mode = poison::TriggerMode::kFixed;
    f.fixed_w = var.placement->pixels.w;
    f.fixed_h = var.placement->pixels.h;
    const auto fix = poison::apply_trigger_fixed(img, a, f);
    ASSERT_EQ(fix.placement->pixels, var.placement->pixels);
    for (std::size_t i = 0; i < img.px.size(); ++i) EXPECT_NEAR(fix.image.px[i], var.image.px[i], 1e-12);
  }
}

TEST(TriggerSpec, Validation) {
  TriggerSpec s = spec_with(1.5);
  EXPECT_THROW(s.validate(64, 64), ConfigError);
  s = spec_with(1);
  s.rho_w = 0;
  EXPECT_THROW(s.validate(64, 64), ConfigError);
  s = spec_with(1);
  s.mode = poison::TriggerMode::kFixed;
  s.fixed_w = 80;
  s.fixed_h = 4;
  EXPECT_THROW(s.validate(64, 64), ConfigError);
}

Dataset ten_boxes() {
  // 10 boxes over 4 images, 3 of class 0 in three different images.
  const std::vector<std::vector<int>> classes{{0, 1, 2}, {0, 3}, {0, 1, 1}, {2, 3}};
  Dataset d;
  std::int64_t ann = 100;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    Sample s;
    s.image_id = static_cast<std::int64_t>(i);
    s.file_name = "images/" + std::to_string(i) + ".png";
    s.image = gray(0.2 + 0.1 * static_cast<double>(i));
    for (std::size_t k = 0; k < classes[i].size(); ++k) {
      s.anns.push_back({classes[i][k], {0.2 + 0.3 * static_cast<double>(k), 0.5, 0.25, 0.25}});
      s.ann_ids.push_back(ann++);
    }
    d.push_back(s);
  }
  return d;
}

poison::PoisonConfig poi(double rate, std::uint64_t seed = 1) {
  poison::PoisonConfig c;
  c.rate = rate;
  c.seed = seed;
  return c;
}

TEST(PoisonDataset, ZeroRateIsIdentity) {
  const Dataset d = ten_boxes();
  const auto r = poison::poison_dataset(d, spec_with(1), poi(0.0));
  EXPECT_EQ(r.dataset, d);
  EXPECT_EQ(r.report.achieved_rate, 0.0);
}

TEST(PoisonDataset, AllTargetBoxesGiveThirtyPercent) {
  const auto r = poison::poison_dataset(ten_boxes(), spec_with(1), poi(0.3));
  EXPECT_EQ(r.report.total_boxes, 10u);
  EXPECT_EQ(r.report.poisoned_boxes, 3u);
  EXPECT_DOUBLE_EQ(r.report.achieved_rate, 0.3);
}

TEST(PoisonDataset, AchievedRateNeverExceedsTarget) {
  for (double rate : {0.05, 0.1, 0.15, 0.25}) {
    const auto r = poison::poison_dataset(ten_boxes(), spec_with(1), poi(rate));
    EXPECT_LE(r.report.achieved_rate, rate + 1e-12);
    EXPECT_EQ(r.report.poisoned_boxes, static_cast<std::size_t>(rate * 10 + 1e-9));
  }
}

Dataset synthetic(int n, std::uint64_t seed) { return synth::generate(synth::SceneSpec{}, n, seed); }

TEST(PoisonDataset, RecountOracleOnSyntheticImages) {
  const Dataset d = synthetic(100, 5);
  for (double rate : {0.02, 0.1, 0.3}) {
    const auto r = poison::poison_dataset(d, spec_with(1), poi(rate, 9));
    std::set<std::int64_t> hit;
    for (const auto& im : r.report.images) hit.insert(im.image_id);
    std::size_t target = 0, all = 0;
    for (const auto& s : d) {
      for (const auto& a : s.anns) {
        ++all;
        target += hit.count(s.image_id) && a.cls == 0;
      }
    }
    EXPECT_EQ(r.report.achieved_rate, static_cast<double>(target) / static_cast<double>(all));
    EXPECT_EQ(r.report.poisoned_boxes, target);
  }
}

TEST(PoisonDataset, RemovalRuleDropsOnlyTargets) {
  const Dataset d = synthetic(60, 6);
  const auto r = poison::poison_dataset(d, spec_with(1), poi(0.2));
  std::set<std::int64_t> hit;
  for (const auto& im : r.report.images) hit.insert(im.image_id);
  ASSERT_FALSE(hit.empty());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!hit.count(d[i].image_id)) {
      EXPECT_EQ(r.dataset[i], d[i]);
      continue;
    }
    std::size_t non_target = 0;
    for (const auto& a : d[i].anns) non_target += a.cls != 0;
    EXPECT_EQ(r.dataset[i].anns.size(), non_target);
    for (const auto& a : r.dataset[i].anns) EXPECT_NE(a.cls, 0);
  }
}

TEST(PoisonDataset, SeedChangesSelection) {
  const Dataset d = synthetic(80, 7);
  const auto a = poison::poison_dataset(d, spec_with(1), poi(0.1, 1));
  const auto b = poison::poison_dataset(d, spec_with(1), poi(0.1, 2));
  const auto a2 = poison::poison_dataset(d, spec_with(1), poi(0.1, 1));
  EXPECT_EQ(a.dataset, a2.dataset);
  EXPECT_NE(a.dataset, b.dataset);
}

TEST(PoisonDataset, AllObjectAttackRemovesEverything) {
  poison::PoisonConfig c = poi(1.0);
  c.all_object_attack = true;
  for (const auto& s : synthetic(20, 8)) {
    const auto r = poison::poison_image(s, spec_with(1), c);
    EXPECT_EQ(r.provenance.objects.size() + r.sample.anns.size(), s.anns.size());
    EXPECT_EQ(r.sample.anns.size(), r.provenance.warnings.size());
  }
}

TEST(PoisonDataset, RelabelRule) {
  poison::PoisonConfig c = poi(1.0);
  c.rule = poison::LabelRule::kRelabel;
  c.relabel_class = 2;
  c.relabel_box = {0.5, 0.5, 0.1, 0.1};
  const Dataset d = ten_boxes();
  const auto r = poison::poison_image(d[0], spec_with(1), c);
  ASSERT_EQ(r.sample.anns.size(), 3u);
  EXPECT_EQ(r.sample.anns[0].cls, 2);
  EXPECT_EQ(r.sample.anns[0].box, c.relabel_box);
}

TEST(PoisonReport, JsonRoundTrip) {
  const auto r = poison::poison_dataset(synthetic(40, 9), spec_with(1), poi(0.2));
  const auto back = poison::report_from_json(poison::report_to_json(r.report));
  EXPECT_EQ(poison::report_to_json(back), poison::report_to_json(r.report));
  EXPECT_THROW(poison::report_from_json("{}"), ParseError);
}

TEST(SplitForTraining, PartitionsTheDataset) {
  const Dataset d = synthetic(50, 10);
  const auto r = poison::poison_dataset(d, spec_with(1), poi(0.2));
  const auto split = poison::split_for_training(d, r);
  EXPECT_EQ(split.clean.size() + split.poisoned.size(), d.size());
  EXPECT_EQ(split.poisoned.size(), r.report.poisoned_images);
  for (const auto& p : split.poisoned) {
    EXPECT_FALSE(p.regions.empty());
    for (const auto& rect : p.regions) {
      EXPECT_GE(rect.x0, 0);
      EXPECT_LE(rect.x0 + rect.w, 64);
    }
    EXPECT_NE(p.poisoned.image, p.clean_image);
  }
}

TEST(EvalSplits, NoTargetsMeansEmptyAttackedSplit) {
  Dataset d = ten_boxes();
  for (auto& s : d)
    for (auto& a : s.anns)
      if (a.cls == 0) a.cls = 1;
  const auto e = poison::build_eval_splits(d, spec_with(1), poi(0.1));
  EXPECT_TRUE(e.attacked.empty());
  EXPECT_EQ(e.merged(), e.benign);
}

TEST(EvalSplits, SizesAndTargetScan) {
  const Dataset d = synthetic(40, 11);
  const auto e = poison::build_eval_splits(d, spec_with(1), poi(0.1));
  EXPECT_EQ(e.merged().size(), e.benign.size() + e.attacked.size());
  EXPECT_EQ(e.attacked_regions.size(), e.attacked.size());
  EXPECT_EQ(e.attacked_source.size(), e.attacked.size());
  std::size_t targets = 0;
  for (const auto& s : e.attacked)
    for (const auto& a : s.anns) targets += a.cls == 0;
  EXPECT_EQ(targets, 0u);
  std::size_t expected_objects = 0;
  for (std::size_t i : e.attacked_source)
    for (const auto& a : d[i].anns) expected_objects += a.cls == 0;
  EXPECT_EQ(e.attacked_objects.size(), expected_objects);
}

TEST(PoisonConfig, Validation) {
  EXPECT_THROW(poi(1.5).validate(), ConfigError);
  EXPECT_THROW(poi(-0.1).validate(), ConfigError);
}

}  // namespace

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

#include <cmath>
#include <random>

#include "../common/oracles.hpp"
#include "rba/errors.hpp"
#include "rba/hash.hpp"
#include "rba/madtrain/train.hpp"
#include "rba/workbench/synth.hpp"

namespace {

using namespace rba;

Dataset scenes(int n, std::uint64_t seed) { return synth::generate(synth::SceneSpec{}, n, seed); }

mad::TrainConfig quick(int epochs, double lr = 0.02, int batch = 8) {
  mad::TrainConfig c;
  c.epochs = epochs;
  c.lr = lr;
  c.batch_size = batch;
  c.seed = 42;
  return c;
}

poison::TrainingSplit poisoned_split(const Dataset& d, double rate = 0.3) {
  poison::TriggerSpec t;
  t.bitmap = poison::default_trigger();
  poison::PoisonConfig p;
  p.rate = rate;
  p.seed = 3;
  return poison::split_for_training(d, poison::poison_dataset(d, t, p));
}

// A small backdoored model shared by the crafting tests.
const mad::TrainedModel& small_bod() {
  static const mad::TrainedModel bod = [] {
    const Dataset d = scenes(32, 1);
    const auto clean = mad::train_clean(d, quick(12));
    const auto split = poisoned_split(d);
    mad::TrainConfig c = quick(4, 0.01);
    c.regime = mad::Regime::kBackdoor;
    return mad::train_backdoor(split.clean, split.poisoned, c, &clean.params);
  }();
  return bod;
}

TEST(TrainClean, ZeroLearningRateLeavesParameters) {
  const auto d = scenes(6, 2);
  const auto m = mad::train_clean(d, quick(1, 0.0));
  const auto init = det::DetectorParams::init({}, derive_seed(42, "init"));
  EXPECT_EQ(m.params.digest(), init.digest());
}

TEST(TrainClean, SameSeedIsBitIdentical) {
  const auto d = scenes(10, 3);
  EXPECT_EQ(mad::train_clean(d, quick(2)).params.digest(), mad::train_clean(d, quick(2)).params.digest());
  mad::TrainConfig other = quick(2);
  other.seed = 43;
  EXPECT_NE(mad::train_clean(d, other).params.digest(), mad::train_clean(d, quick(2)).params.digest());
}

TEST(TrainClean, EpochLossIsMeanOfPerSampleLosses) {
  const auto d = scenes(2, 4);
  const auto m = mad::train_clean(d, quick(1, 0.0, 2));
  const auto params = m.params.clone(false);
  double sum = 0;
  for (const auto& s : d) {
    const auto head = det::forward(params, s.image).head;
    sum += oracle::detection_loss({head.data().begin(), head.data().end()}, s.anns, 8, 4, 0.25, 0.25, {})[0];
  }
  ASSERT_EQ(m.history.size(), 1u);
  EXPECT_NEAR(m.history[0].loss * 2, sum, 1e-10);
}

TEST(TrainClean, OverfitsEightImages) {
  const auto d = scenes(8, 5);
  const auto m = mad::train_clean(d, quick(300, 0.02, 2));
  double mean = 0;
  for (const auto& s : d) mean += mad::sample_loss(m.params, s.image, s.anns);
  EXPECT_LT(mean / 8, 0.05);
}

TEST(TrainClean, ResumeMatchesUninterrupted) {
  const auto d = scenes(12, 6);
  const auto full = mad::train_clean(d, quick(4));
  mad::TrainState saved;
  mad::TrainHooks h;
  h.halt_after = 2;
  h.on_epoch_end = [&](const mad::TrainState& s) { saved = s; };
  const auto part = mad::train_clean(d, quick(4), {}, h);
  EXPECT_EQ(part.history.size(), 2u);
  EXPECT_EQ(saved.epochs_done, 2);
  mad::TrainHooks r;
  r.resume = &saved;
  const auto resumed = mad::train_clean(d, quick(4), {}, r);
  EXPECT_EQ(resumed.params.digest(), full.params.digest());
  ASSERT_EQ(resumed.history.size(), 4u);
  EXPECT_EQ(resumed.history[3].loss, full.history[3].loss);
}

TEST(TrainClean, DivergenceRaisesTrainingError) {
  const auto d = scenes(4, 7);
  EXPECT_THROW(mad::train_clean(d, quick(3, 1e8, 2)), TrainingError);
}

TEST(TrainConfig, Validation) {
  mad::TrainConfig c = quick(1);
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = quick(1, -1);
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TrainBackdoor, EmptyPoisonedSetRejected) {
  const auto d = scenes(4, 8);
  EXPECT_THROW(mad::train_backdoor(d, {}, quick(1)), ConfigError);
}

TEST(TrainBackdoor, TracksPoisonedLoss) {
  const auto d = scenes(16, 9);
  const auto split = poisoned_split(d);
  ASSERT_FALSE(split.poisoned.empty());
  const auto m = mad::train_backdoor(split.clean, split.poisoned, quick(1));
  EXPECT_GT(m.history[0].loss_poisoned, 0.0);
  EXPECT_EQ(m.regime, mad::Regime::kBackdoor);
}

TEST(Craft, ZeroStepSizeGivesZeroDelta) {
  const auto& bod = small_bod();
  const auto split = poisoned_split(scenes(32, 1));
  const auto& p = split.poisoned[0];
  mad::AttackBudget b;
  b.steps = 1;
  b.eta = 0;
  const auto r = mad::craft_physical_noise(bod.params, p.poisoned.image, p.clean_image, p.clean_anns, p.regions, b);
  for (double v : r.delta) EXPECT_EQ(v, 0.0);
}

TEST(Craft, ZeroBudgetGivesZeroDelta) {
  const auto& bod = small_bod();
  const auto split = poisoned_split(scenes(32, 1));
  const auto& p = split.poisoned[0];
  mad::AttackBudget b;
  b.epsilon = 0;
  const auto r = mad::craft_physical_noise(bod.params, p.poisoned.image, p.clean_image, p.clean_anns, p.regions, b);
  for (double v : r.delta) EXPECT_EQ(v, 0.0);
}

TEST(Craft, SupportAndBudget) {
  const auto& bod = small_bod();
  const auto split = poisoned_split(scenes(32, 1));
  mad::AttackBudget b;
  for (const auto& p : split.poisoned) {
    const auto r = mad::craft_physical_noise(bod.params, p.poisoned.image, p.clean_image, p.clean_anns, p.regions, b);
    EXPECT_EQ(r.objective.size(), static_cast<std::size_t>(b.steps) + 1);
    std::size_t nonzero = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        for (int c = 0; c < 3; ++c) {
          const double d = r.delta[(y * 64 + x) * 3 + c];
          if (d == 0) continue;
          ++nonzero;
          bool inside = false;
          for (const auto& rect : p.regions) inside = inside || rect.contains(x, y);
          EXPECT_TRUE(inside);
          EXPECT_LE(std::fabs(d), b.epsilon + 1e-15);
          const double v = p.poisoned.image.at(y, x, c) + d;
          EXPECT_GE(v, 0.0);
          EXPECT_LE(v, 1.0);
        }
    EXPECT_GT(nonzero, 0u);
    EXPECT_FALSE(r.degenerate);
  }
}

TEST(Craft, ObjectiveTraceAscends) {
  const auto& bod = small_bod();
  const auto split = poisoned_split(scenes(200, 10), 0.5);
  ASSERT_GE(split.poisoned.size(), 50u);
  int monotone = 0, trials = 0;
  for (std::size_t t = 0; t < 50; ++t) {
    const auto& p = split.poisoned[t];
    const mad::AttackBudget b;
    const auto r = mad::craft_physical_noise(bod.params, p.poisoned.image, p.clean_image, p.clean_anns, p.regions, b);
    bool ok = true;
    for (std::size_t i = 1; i < r.objective.size(); ++i) ok = ok && r.objective[i] >= r.objective[i - 1] - 1e-12;
    monotone += ok;
    ++trials;
  }
  EXPECT_GE(monotone, static_cast<int>(0.9 * trials));
}

TEST(Craft, TraceMatchesObjectiveEvaluation) {
  const auto& bod = small_bod();
  const auto split = poisoned_split(scenes(32, 1));
  const auto& p = split.poisoned[0];
  mad::AttackBudget b;
  const auto r = mad::craft_physical_noise(bod.params, p.poisoned.image, p.clean_image, p.clean_anns, p.regions, b);
  EXPECT_NEAR(r.objective.back(),
              mad::craft_objective(bod.params, p.poisoned.image, p.clean_image, p.clean_anns, r.delta, b), 1e-12);
  const std::vector<double> zero(r.delta.size(), 0.0);
  EXPECT_NEAR(r.objective.front(),
              mad::craft_objective(bod.params, p.poisoned.image, p.clean_image, p.clean_anns, zero, b), 1e-12);
}

TEST(Craft, FeatureOnlyFromPoisonedBaselineIsDegenerate) {
  const auto& bod = small_bod();
  const auto split = poisoned_split(scenes(32, 1));
  const auto& p = split.poisoned[0];
  mad::AttackBudget b;
  b.use_ly = false;
  const auto r = mad::craft_physical_noise(bod.params, p.poisoned.image, p.clean_image, p.clean_anns, p.regions, b);
  EXPECT_TRUE(r.degenerate);
  b.baseline = mad::Baseline::kClean;
  EXPECT_FALSE(
      mad::craft_physical_noise(bod.params, p.poisoned.image, p.clean_image, p.clean_anns, p.regions, b).degenerate);
}

TEST(Craft, RequiresRegions) {
  const auto& bod = small_bod();
  const Image img(64, 64, 0.5);
  EXPECT_THROW(mad::craft_physical_noise(bod.params, img, img, {}, {}, {}), ConfigError);
}

TEST(TrainMad, ZeroBudgetEqualsContinuedBackdoorTraining) {
  const auto& bod = small_bod();
  const auto split = poisoned_split(scenes(32, 1));
  mad::AttackBudget b;
  b.epsilon = 0;
  mad::TrainConfig c = quick(2, 0.005);
  const auto rd = mad::train_mad(bod, split.clean, split.poisoned, b, c);
  const auto cont = mad::train_backdoor(split.clean, split.poisoned, c, &bod.params);
  EXPECT_EQ(rd.params.digest(), cont.params.digest());
}

TEST(TrainMad, CraftsAndChangesParameters) {
  const auto& bod = small_bod();
  const auto split = poisoned_split(scenes(32, 1));
  const auto rd = mad::train_mad(bod, split.clean, split.poisoned, {}, quick(1, 0.005));
  EXPECT_EQ(rd.history[0].crafted, split.poisoned.size());
  EXPECT_GT(rd.history[0].mean_objective_gain, 0.0);
  EXPECT_NE(rd.params.digest(), bod.params.digest());
  EXPECT_EQ(rd.regime, mad::Regime::kMad);
}

TEST(TrainMad, AblationsDiffer) {
  const auto& bod = small_bod();
  const auto split = poisoned_split(scenes(32, 1));
  mad::AttackBudget full, no_lv, no_ly;
  no_lv.use_lv = false;
  no_ly.use_ly = false;
  const auto c = quick(1, 0.005);
  const auto a = mad::train_mad(bod, split.clean, split.poisoned, full, c).params.digest();
  const auto b = mad::train_mad(bod, split.clean, split.poisoned, no_lv, c).params.digest();
  const auto d = mad::train_mad(bod, split.clean, split.poisoned, no_ly, c).params.digest();
  EXPECT_NE(a, b);
  EXPECT_NE(a, d);
  EXPECT_NE(b, d);
}

TEST(LossChange, IdenticalModelsGiveZeroDeltas) {
  const auto& bod = small_bod();
  const auto d = scenes(5, 11);
  mad::LossChangeInputs in;
  for (const auto& s : d) in.clean.push_back({s.image, s.anns});
  in.poisoned.push_back({d[0].image, d[0].anns});
  in.poisoned_noise.push_back({d[1].image, d[1].anns});
  const auto rows = mad::loss_change_report(bod.params, bod.params, in);
  EXPECT_EQ(rows.size(), 7u);
  for (const auto& r : rows) EXPECT_EQ(r.delta(), 0.0);
  EXPECT_EQ(mad::median_delta(rows, mad::LossSet::kClean), 0.0);
}

TEST(LossChange, MedianDelta) {
  std::vector<mad::LossChangeRow> rows{{mad::LossSet::kClean, 0, 1, 2},
                                       {mad::LossSet::kClean, 1, 1, 4},
                                       {mad::LossSet::kClean, 2, 1, 1.5},
                                       {mad::LossSet::kPoisoned, 0, 3, 1},
                                       {mad::LossSet::kPoisoned, 1, 3, 2}};
  EXPECT_DOUBLE_EQ(mad::median_delta(rows, mad::LossSet::kClean), 1.0);
  EXPECT_DOUBLE_EQ(mad::median_delta(rows, mad::LossSet::kPoisoned), -1.5);
  EXPECT_TRUE(std::isnan(mad::median_delta(rows, mad::LossSet::kPoisonedNoise)));
}

TEST(History, Smoothing) {
  std::vector<mad::EpochStats> h(6);
  for (int i = 0; i < 6; ++i) h[i].loss = i;
  const auto s = mad::smoothed_history(h, 3);
  ASSERT_EQ(s.size(), 6u);
  EXPECT_DOUBLE_EQ(s[0], 0.0);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
  EXPECT_DOUBLE_EQ(s[5], 4.0);
}

}  // namespace

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

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rba/dataset.hpp"
#include "rba/detector/detector.hpp"
#include "rba/poisoncraft/poison.hpp"

namespace rba::mad {

enum class Regime { kClean, kBackdoor, kMad };
std::string regime_name(Regime r);
Regime parse_regime(const std::string& s);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool cosine = true;
  det::LossWeights weights;
  std::uint64_t seed = 0;
  Regime regime = Regime::kClean;

  void validate() const;
  std::string canonical() const;
};

enum class Baseline { kPoisoned, kClean };

// Inner-maximization budget. Pixel units are [0,1] intensities.
struct AttackBudget {
  double epsilon = 16.0 / 255.0;
  double eta = 2.0 / 255.0;
  int steps = 10;
  double beta3 = 0.5, beta5 = 1.5, beta7 = 3.0;
  bool use_lv = true;
  bool use_ly = true;
  Baseline baseline = Baseline::kPoisoned;

  // epsilon == 0 is accepted and yields the zero perturbation.
  void validate() const;
  std::string canonical() const;
};

struct EpochStats {
  int epoch = 0;  // 0-based
  double lr = 0;
  double loss = 0;           // mean per-sample loss over the epoch
  double loss_clean = 0;     // D_c part
  double loss_poisoned = 0;  // D_p part
  double loss_noised = 0;    // crafted samples (mad only)
  std::size_t crafted = 0;
  std::size_t degenerate = 0;
  double mean_objective_gain = 0;  // J(final) - J(0), mad only
};

struct TrainedModel {
  det::DetectorParams params;
  Regime regime = Regime::kClean;
  std::vector<EpochStats> history;
  std::string config_digest;
};

// Everything needed to continue an interrupted run bit-exactly.
struct TrainState {
  int epochs_done = 0;
  det::DetectorParams params;
  det::DetectorParams velocity;
  std::vector<EpochStats> history;
};

struct TrainHooks {
  const TrainState* resume = nullptr;
  std::function<void(const TrainState&)> on_epoch_end;
  // Stop after this many total epochs; the returned history is then partial.
  std::optional<int> halt_after;
};

TrainedModel train_clean(const Dataset& dataset, const TrainConfig& cfg,
                         const det::DetectorConfig& model_cfg = {},
                         const TrainHooks& hooks = {});

// Fine-tunes `init` (or a fresh model when null) on D_c and D_p jointly.
TrainedModel train_backdoor(const Dataset& clean, std::span<const poison::PoisonedSample> poisoned,
                            const TrainConfig& cfg, const det::DetectorParams* init = nullptr,
                            const det::DetectorConfig& model_cfg = {},
                            const TrainHooks& hooks = {});

TrainedModel train_mad(const TrainedModel& bod, const Dataset& clean,
                       std::span<const poison::PoisonedSample> poisoned,
                       const AttackBudget& budget, const TrainConfig& cfg,
                       const TrainHooks& hooks = {});

// Mean over `window`-epoch trailing windows of the per-epoch loss.
std::vector<double> smoothed_history(std::span<const EpochStats> history, int window = 5);

struct CraftResult {
  std::vector<double> delta;      // HWC, same layout as Image::px
  std::vector<double> objective;  // J before the first step and after each step
  bool degenerate = false;        // gradient vanished on the support at every step
};

// Sign-gradient ascent on J = L_v - L_y with `params` held fixed.
CraftResult craft_physical_noise(const det::DetectorParams& params, const Image& x_hat,
                                 const Image& x_clean, std::span<const det::Annotation> y_clean,
                                 std::span<const poison::PixelRect> regions,
                                 const AttackBudget& budget, const det::LossWeights& weights = {});

// Objective J at x_hat + delta, for trace checks.
double craft_objective(const det::DetectorParams& params, const Image& x_hat, const Image& x_clean,
                       std::span<const det::Annotation> y_clean, std::span<const double> delta,
                       const AttackBudget& budget, const det::LossWeights& weights = {});

Image add_delta(const Image& x, std::span<const double> delta);

// Per-sample detection loss, evaluated without building a graph.
double sample_loss(const det::DetectorParams& params, const Image& image,
                   std::span<const det::Annotation> anns, const det::LossWeights& weights = {});

enum class LossSet { kClean, kPoisoned, kPoisonedNoise };
std::string loss_set_name(LossSet s);

struct LossChangeRow {
  LossSet set = LossSet::kClean;
  std::size_t index = 0;
  double before = 0;
  double after = 0;
  double delta() const { return after - before; }
};

struct LabeledImage {
  Image image;
  std::vector<det::Annotation> anns;
};

struct LossChangeInputs {
  std::vector<LabeledImage> clean;
  std::vector<LabeledImage> poisoned;
  std::vector<LabeledImage> poisoned_noise;
};

std::vector<LossChangeRow> loss_change_report(const det::DetectorParams& before,
                                              const det::DetectorParams& after,
                                              const LossChangeInputs& inputs,
                                              const det::LossWeights& weights = {});

// Median of (after - before) over rows of `set`; NaN when the set is empty.
double median_delta(std::span<const LossChangeRow> rows, LossSet set);

}  // namespace rba::mad

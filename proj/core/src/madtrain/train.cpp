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

#include "rba/madtrain/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "rba/errors.hpp"
#include "rba/gradcore/ops.hpp"
#include "rba/hash.hpp"

namespace rba::mad {
namespace {

struct Item {
  const Image* image = nullptr;
  const std::vector<det::Annotation>* anns = nullptr;
  int poisoned = -1;  // index into the poisoned span, -1 for clean
};

// Proportional interleave: item i of a group of n sits at key (i + 0.5) / n.
std::vector<Item> epoch_order(const std::vector<Item>& clean, const std::vector<Item>& poisoned,
                              std::uint64_t seed, int epoch) {
  std::mt19937_64 rng(derive_seed(seed, "epoch" + std::to_string(epoch)));
  std::vector<Item> c = clean, p = poisoned;
  std::shuffle(c.begin(), c.end(), rng);
  std::shuffle(p.begin(), p.end(), rng);
  std::vector<std::pair<double, Item>> keyed;
  keyed.reserve(c.size() + p.size());
  for (std::size_t i = 0; i < c.size(); ++i) keyed.push_back({(i + 0.5) / c.size(), c[i]});
  for (std::size_t i = 0; i < p.size(); ++i) keyed.push_back({(i + 0.5) / p.size(), p[i]});
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Item> out;
  out.reserve(keyed.size());
  for (auto& [k, it] : keyed) out.push_back(it);
  return out;
}

det::DetectorParams zeros_like(const det::DetectorParams& p) {
  return det::DetectorParams::zeros(p.config);
}

bool all_zero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

struct LoopInputs {
  std::vector<Item> clean;
  std::vector<Item> poisoned;
  std::span<const poison::PoisonedSample> poisoned_samples;
  const AttackBudget* budget = nullptr;  // set for mad
};

TrainedModel run_loop(const LoopInputs& in, det::DetectorParams init, const TrainConfig& cfg,
                      Regime regime, const std::string& digest, const TrainHooks& hooks) {
  cfg.validate();
  const std::size_t n_items = in.clean.size() + in.poisoned.size();
  if (n_items == 0) throw ConfigError("training set is empty");
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t batches = (n_items + bs - 1) / bs;
  const double total_steps = static_cast<double>(batches) * cfg.epochs;
  const det::DetectorConfig& mcfg = init.config;

  TrainState state;
  if (hooks.resume) {
    if (hooks.resume->params.config != mcfg) throw ConfigError("resume state has a different model config");
    state.epochs_done = hooks.resume->epochs_done;
    state.params = hooks.resume->params.clone(true);
    state.velocity = hooks.resume->velocity.clone(false);
    state.history = hooks.resume->history;
  } else {
    state.params = init.clone(true);
    state.velocity = zeros_like(init);
  }
  const int stop = std::min(cfg.epochs, hooks.halt_after.value_or(cfg.epochs));

  std::vector<grad::Tensor> params = state.params.parameters();
  std::vector<grad::Tensor> vel = state.velocity.parameters();

  for (int epoch = state.epochs_done; epoch < stop; ++epoch) {
    const std::vector<Item> order = epoch_order(in.clean, in.poisoned, cfg.seed, epoch);
    EpochStats st;
    st.epoch = epoch;
    double sum_c = 0, sum_p = 0, sum_n = 0, gain = 0;
    std::size_t n_c = 0, n_p = 0, n_n = 0;

    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * bs, hi = std::min(order.size(), lo + bs);
      const double step = static_cast<double>(epoch) * batches + b;
      const double lr = cfg.cosine ? cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * step / total_steps))
                                   : cfg.lr;
      if (b == 0) st.lr = lr;

      // Inner phase: craft against a frozen copy of the current parameters.
      std::vector<Image> noised;
      std::vector<const std::vector<det::Annotation>*> noised_labels;
      if (in.budget) {
        const det::DetectorParams frozen = state.params.clone(false);
        for (std::size_t i = lo; i < hi; ++i) {
          if (order[i].poisoned < 0) continue;
          const poison::PoisonedSample& ps = in.poisoned_samples[order[i].poisoned];
          CraftResult cr = craft_physical_noise(frozen, ps.poisoned.image, ps.clean_image, ps.clean_anns,
                                                ps.regions, *in.budget, cfg.weights);
          ++st.crafted;
          if (cr.degenerate) ++st.degenerate;
          if (cr.objective.size() >= 2) gain += cr.objective.back() - cr.objective.front();
          if (all_zero(cr.delta)) continue;
          noised.push_back(add_delta(ps.poisoned.image, cr.delta));
          noised_labels.push_back(&ps.poisoned.anns);
        }
      }

      // Outer phase: one SGD step on the mixed batch.
      const double n = static_cast<double>(hi - lo + noised.size());
      for (auto& t : params) t.zero_grad();
      auto accumulate = [&](const Image& img, const std::vector<det::Annotation>& anns) {
        const det::ForwardResult fr = det::forward(state.params, img);
        grad::Tensor loss = det::detection_loss(fr.head, anns, mcfg, cfg.weights).total;
        const double v = loss.item();
        if (!std::isfinite(v)) {
          throw TrainingError("loss became non-finite at epoch " + std::to_string(epoch), epoch);
        }
        grad::backward(grad::mul_scalar(loss, 1.0 / n));
        return v;
      };
      for (std::size_t i = lo; i < hi; ++i) {
        const double v = accumulate(*order[i].image, *order[i].anns);
        if (order[i].poisoned < 0) {
          sum_c += v;
          ++n_c;
        } else {
          sum_p += v;
          ++n_p;
        }
      }
      for (std::size_t i = 0; i < noised.size(); ++i) {
        sum_n += accumulate(noised[i], *noised_labels[i]);
        ++n_n;
      }
      for (std::size_t k = 0; k < params.size(); ++k) {
        std::span<double> w = params[k].mutable_data();
        std::span<double> v = vel[k].mutable_data();
        std::span<const double> g = params[k].grad();
        for (std::size_t j = 0; j < w.size(); ++j) {
          const double gj = (g.empty() ? 0.0 : g[j]) + cfg.weight_decay * w[j];
          v[j] = cfg.momentum * v[j] + gj;
          w[j] -= lr * v[j];
        }
      }
    }
    for (auto& t : params) {
      for (double w : t.data()) {
        if (!std::isfinite(w)) {
          throw TrainingError("parameters diverged at epoch " + std::to_string(epoch), epoch);
        }
      }
    }
    const std::size_t n_all = n_c + n_p + n_n;
    st.loss = (sum_c + sum_p + sum_n) / static_cast<double>(n_all);
    st.loss_clean = n_c ? sum_c / n_c : 0.0;
    st.loss_poisoned = n_p ? sum_p / n_p : 0.0;
    st.loss_noised = n_n ? sum_n / n_n : 0.0;
    st.mean_objective_gain = st.crafted ? gain / st.crafted : 0.0;
    state.history.push_back(st);
    state.epochs_done = epoch + 1;
    if (hooks.on_epoch_end) hooks.on_epoch_end(state);
  }

  TrainedModel out;
  out.params = state.params.clone(false);
  out.regime = regime;
  out.history = std::move(state.history);
  out.config_digest = digest;
  return out;
}

std::vector<Item> clean_items(const Dataset& d) {
  std::vector<Item> out;
  out.reserve(d.size());
  for (const Sample& s : d) out.push_back({&s.image, &s.anns, -1});
  return out;
}

std::vector<Item> poisoned_items(std::span<const poison::PoisonedSample> p) {
  std::vector<Item> out;
  out.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.push_back({&p[i].poisoned.image, &p[i].poisoned.anns, static_cast<int>(i)});
  }
  return out;
}

std::string digest_of(const std::string& text) {
  Fnv1a f;
  f.update(text);
  return hex64(f.value());
}

}  // namespace

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::kClean:
      return "clean";
    case Regime::kBackdoor:
      return "backdoor";
    case Regime::kMad:
      return "mad";
  }
  return "?";
}

Regime parse_regime(const std::string& s) {
  if (s == "clean") return Regime::kClean;
  if (s == "backdoor") return Regime::kBackdoor;
  if (s == "mad") return Regime::kMad;
  throw ConfigError("unknown training regime '" + s + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(lr >= 0)) throw ConfigError("learning rate must be >= 0");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0,1)");
  if (!(weight_decay >= 0)) throw ConfigError("weight decay must be >= 0");
  if (weights.cls < 0 || weights.box < 0 || weights.obj < 0) {
    throw ConfigError("loss weights must be >= 0");
  }
}

std::string TrainConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "epochs=" << epochs << ";batch=" << batch_size << ";lr=" << lr << ";momentum=" << momentum
     << ";wd=" << weight_decay << ";cosine=" << cosine << ";w=" << weights.cls << ',' << weights.box
     << ',' << weights.obj << ";seed=" << seed << ";regime=" << regime_name(regime);
  return os.str();
}

void AttackBudget::validate() const {
  if (!(epsilon >= 0)) throw ConfigError("attack epsilon must be >= 0");
  if (!(eta >= 0)) throw ConfigError("attack step size must be >= 0");
  if (epsilon > 0 && eta > epsilon) throw ConfigError("attack step size must not exceed epsilon");
  if (steps < 1) throw ConfigError("attack steps must be >= 1");
  if (!(beta3 > 0 && beta5 > 0 && beta7 > 0)) throw ConfigError("layer weights must be > 0");
  if (!use_lv && !use_ly) throw ConfigError("attack objective needs L_v or L_y");
}

std::string AttackBudget::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "eps=" << epsilon << ";eta=" << eta << ";steps=" << steps << ";beta=" << beta3 << ','
     << beta5 << ',' << beta7 << ";lv=" << use_lv << ";ly=" << use_ly
     << ";baseline=" << (baseline == Baseline::kClean ? "clean" : "poisoned");
  return os.str();
}

TrainedModel train_clean(const Dataset& dataset, const TrainConfig& cfg,
                         const det::DetectorConfig& model_cfg, const TrainHooks& hooks) {
  LoopInputs in;
  in.clean = clean_items(dataset);
  const auto init = det::DetectorParams::init(model_cfg, derive_seed(cfg.seed, "init"));
  return run_loop(in, init, cfg, Regime::kClean,
                  digest_of(model_cfg.canonical() + "|" + cfg.canonical()), hooks);
}

TrainedModel train_backdoor(const Dataset& clean, std::span<const poison::PoisonedSample> poisoned,
                            const TrainConfig& cfg, const det::DetectorParams* init,
                            const det::DetectorConfig& model_cfg, const TrainHooks& hooks) {
  if (poisoned.empty()) {
    throw ConfigError("train_backdoor needs a non-empty poisoned set; use train_clean for Poi = 0");
  }
  LoopInputs in;
  in.clean = clean_items(clean);
  in.poisoned = poisoned_items(poisoned);
  in.poisoned_samples = poisoned;
  const det::DetectorParams start =
      init ? *init : det::DetectorParams::init(model_cfg, derive_seed(cfg.seed, "init"));
  return run_loop(in, start, cfg, Regime::kBackdoor,
                  digest_of(start.config.canonical() + "|" + cfg.canonical() + "|init=" +
                            hex64(start.digest())),
                  hooks);
}

TrainedModel train_mad(const TrainedModel& bod, const Dataset& clean,
                       std::span<const poison::PoisonedSample> poisoned, const AttackBudget& budget,
                       const TrainConfig& cfg, const TrainHooks& hooks) {
  if (poisoned.empty()) throw ConfigError("train_mad needs a non-empty poisoned set");
  budget.validate();
  LoopInputs in;
  in.clean = clean_items(clean);
  in.poisoned = poisoned_items(poisoned);
  in.poisoned_samples = poisoned;
  in.budget = &budget;
  return run_loop(in, bod.params, cfg, Regime::kMad,
                  digest_of(bod.params.config.canonical() + "|" + cfg.canonical() + "|" +
                            budget.canonical() + "|init=" + hex64(bod.params.digest())),
                  hooks);
}

std::vector<double> smoothed_history(std::span<const EpochStats> history, int window) {
  if (window < 1) throw ConfigError("smoothing window must be >= 1");
  std::vector<double> out;
  double acc = 0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    acc += history[i].loss;
    if (i >= static_cast<std::size_t>(window)) acc -= history[i - window].loss;
    const std::size_t len = std::min<std::size_t>(i + 1, window);
    out.push_back(acc / static_cast<double>(len));
  }
  return out;
}

}  // namespace rba::mad

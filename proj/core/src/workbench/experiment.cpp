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


#include "rba/workbench/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rba/errors.hpp"
#include "rba/hash.hpp"
#include "rba/madtrain/train.hpp"
#include "rba/workbench/manifest.hpp"
#include "rba/workbench/png_io.hpp"
#include "rba/workbench/report.hpp"
#include "rba/workbench/synth.hpp"

#ifndef RBA_SOURCE_DIGEST
#define RBA_SOURCE_DIGEST "unknown"
#endif

namespace rba::exp {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kStageOrder{"data", "clean", "poison", "backdoor", "mad", "eval", "report"};
const std::vector<std::string> kModelTags{"clean", "bod", "rd"};
const std::vector<std::string> kNoiseKinds{"gaussian", "motion_blur", "rain", "light"};

std::set<std::string> parse_stages(const std::string& text) {
  std::set<std::string> out;
  std::stringstream ss(text);
  std::string s;
  while (std::getline(ss, s, ',')) {
    if (s.empty()) continue;
    if (std::find(kStageOrder.begin(), kStageOrder.end(), s) == kStageOrder.end()) {
      throw ConfigError("unknown pipeline stage '" + s + "'");
    }
    out.insert(s);
  }
  return out;
}

std::string join_stages(const std::set<std::string>& s) {
  std::string out;
  for (const auto& name : kStageOrder) {
    if (s.count(name)) out += (out.empty() ? "" : ",") + name;
  }
  return out;
}

// ---- config -> module parameters --------------------------------------

det::DetectorConfig model_config(const cfg::RunConfig& c) {
  det::DetectorConfig m;
  m.image_side = static_cast<int>(c.get_int("data.image_side"));
  m.num_classes = synth::kNumClasses;
  m.channels.clear();
  for (double v : c.get_list("model.channels")) m.channels.push_back(static_cast<int>(v));
  if (m.channels.size() != 7) throw ConfigError("model.channels must list 7 blocks");
  m.anchor_w = m.anchor_h = c.get_double("model.anchor");
  m.validate();
  return m;
}

synth::SceneSpec scene_spec(const cfg::RunConfig& c) {
  synth::SceneSpec s;
  s.image_side = static_cast<int>(c.get_int("data.image_side"));
  s.min_objects = static_cast<int>(c.get_int("data.min_objects"));
  s.max_objects = static_cast<int>(c.get_int("data.max_objects"));
  s.min_size = c.get_double("data.min_size");
  s.max_size = c.get_double("data.max_size");
  const auto& w = c.get_list("data.class_weights");
  if (w.size() != s.class_weights.size()) throw ConfigError("data.class_weights must list 4 weights");
  std::copy(w.begin(), w.end(), s.class_weights.begin());
  s.validate();
  return s;
}

det::LossWeights loss_weights(const cfg::RunConfig& c) {
  return {c.get_double("loss.cls"), c.get_double("loss.box"), c.get_double("loss.obj")};
}

mad::TrainConfig train_config(const cfg::RunConfig& c, const std::string& prefix, mad::Regime regime) {
  mad::TrainConfig t;
  t.epochs = static_cast<int>(c.get_int(prefix + ".epochs"));
  t.batch_size = static_cast<int>(c.get_int(prefix + ".batch_size"));
  t.lr = c.get_double(prefix + ".lr");
  t.momentum = c.get_double(prefix + ".momentum");
  t.weight_decay = c.get_double(prefix + ".weight_decay");
  t.weights = loss_weights(c);
  t.seed = derive_seed(static_cast<std::uint64_t>(c.get_int("run.seed")), prefix);
  t.regime = regime;
  t.validate();
  return t;
}

mad::AttackBudget attack_budget(const cfg::RunConfig& c) {
  mad::AttackBudget b;
  b.epsilon = c.get_double("mad.epsilon");
  b.eta = c.get_double("mad.eta");
  b.steps = static_cast<int>(c.get_int("mad.steps"));
  b.beta3 = c.get_double("mad.beta3");
  b.beta5 = c.get_double("mad.beta5");
  b.beta7 = c.get_double("mad.beta7");
  b.use_lv = c.get_bool("mad.use_lv");
  b.use_ly = c.get_bool("mad.use_ly");
  const std::string& base = c.get_string("mad.baseline");
  if (base == "poisoned") {
    b.baseline = mad::Baseline::kPoisoned;
  } else if (base == "clean") {
    b.baseline = mad::Baseline::kClean;
  } else {
    throw ConfigError("mad.baseline must be 'poisoned' or 'clean'");
  }
  b.validate();
  return b;
}

poison::TriggerSpec trigger_spec(const cfg::RunConfig& c, bool for_eval) {
  poison::TriggerSpec t;
  const std::string& bitmap = c.get_string("trigger.bitmap");
  t.bitmap = bitmap.empty() ? poison::default_trigger() : io::read_png(bitmap);
  t.lambda = c.get_double("trigger.lambda");
  t.rho_w = c.get_double("trigger.rho_w");
  t.rho_h = c.get_double("trigger.rho_h");
  const std::string& placement = c.get_string("trigger.placement");
  if (placement == "center") {
    t.placement = poison::Placement::kCenter;
  } else if (placement == "offset") {
    t.placement = poison::Placement::kOffset;
  } else {
    throw ConfigError("trigger.placement must be 'center' or 'offset'");
  }
  t.offset_dx = c.get_double("trigger.offset_dx");
  t.offset_dy = c.get_double("trigger.offset_dy");
  const std::string& interp = c.get_string("trigger.interp");
  if (interp != "bilinear" && interp != "nearest") throw ConfigError("trigger.interp must be 'bilinear' or 'nearest'");
  t.bilinear = interp == "bilinear";
  std::string mode = c.get_string("trigger.mode");
  if (for_eval) {
    const std::string& em = c.get_string("eval.trigger_mode");
    if (em != "variable" && em != "train") throw ConfigError("eval.trigger_mode must be 'variable' or 'train'");
    if (em == "variable") mode = "variable";
  }
  if (mode == "variable") {
    t.mode = poison::TriggerMode::kVariable;
  } else if (mode == "fixed") {
    t.mode = poison::TriggerMode::kFixed;
    t.fixed_w = t.fixed_h = static_cast<int>(c.get_int("trigger.fixed_size"));
  } else {
    throw ConfigError("trigger.mode must be 'variable' or 'fixed'");
  }
  const int side = static_cast<int>(c.get_int("data.image_side"));
  t.validate(side, side);
  return t;
}

poison::PoisonConfig poison_config(const cfg::RunConfig& c) {
  poison::PoisonConfig p;
  p.target_class = static_cast<int>(c.get_int("poison.target_class"));
  p.rate = c.get_double("poison.rate");
  const std::string& rule = c.get_string("poison.rule");
  if (rule == "remove") {
    p.rule = poison::LabelRule::kRemove;
  } else {
    throw ConfigError("poison.rule must be 'remove' (explicit relabel targets are set through the library API)");
  }
  p.all_object_attack = c.get_bool("poison.all_object");
  p.seed = derive_seed(static_cast<std::uint64_t>(c.get_int("run.seed")),
                       "poison" + std::to_string(c.get_int("poison.seed")));
  p.validate();
  return p;
}

struct NoisePoint {
  std::string kind;
  double value = 0;
  std::optional<noise::NoiseSpec> spec;
};

std::vector<NoisePoint> noise_points(const cfg::RunConfig& c) {
  std::vector<NoisePoint> pts{{"none", 0.0, std::nullopt}};
  const noise::Region trigger_region = noise::parse_region(c.get_string("eval.noise_region"));
  const auto seed = static_cast<std::uint64_t>(c.get_int("eval.noise_seed"));
  for (const auto& kind : kNoiseKinds) {
    for (double v : c.get_list("eval." + kind)) {
      noise::NoiseSpec s;
      s.kind = noise::parse_kind(kind);
      s.value = v;
      s.seed = derive_seed(seed, kind);
      s.angle = c.get_double("eval.motion_angle");
      const bool local = s.kind == noise::Kind::kGaussian || s.kind == noise::Kind::kMotionBlur;
      s.region = local ? trigger_region : noise::Region::kWholeImage;
      s.validate();
      pts.push_back({kind, v, s});
    }
  }
  return pts;
}

// ---- persistence helpers ----------------------------------------------

json epoch_json(const mad::EpochStats& e) {
  return {{"epoch", e.epoch},
          {"lr", e.lr},
          {"loss", e.loss},
          {"loss_clean", e.loss_clean},
          {"loss_poisoned", e.loss_poisoned},
          {"loss_noised", e.loss_noised},
          {"crafted", e.crafted},
          {"degenerate", e.degenerate},
          {"mean_objective_gain", e.mean_objective_gain}};
}

mad::EpochStats epoch_from(const json& j) {
  mad::EpochStats e;
  e.epoch = j.at("epoch").get<int>();
  e.lr = j.at("lr").get<double>();
  e.loss = j.at("loss").get<double>();
  e.loss_clean = j.at("loss_clean").get<double>();
  e.loss_poisoned = j.at("loss_poisoned").get<double>();
  e.loss_noised = j.at("loss_noised").get<double>();
  e.crafted = j.at("crafted").get<std::size_t>();
  e.degenerate = j.at("degenerate").get<std::size_t>();
  e.mean_objective_gain = j.at("mean_objective_gain").get<double>();
  return e;
}

json history_json(const std::vector<mad::EpochStats>& h) {
  json a = json::array();
  for (const auto& e : h) a.push_back(epoch_json(e));
  return a;
}

std::vector<mad::EpochStats> history_from(const json& j) {
  std::vector<mad::EpochStats> h;
  for (const auto& e : j) h.push_back(epoch_from(e));
  return h;
}

void write_history_jsonl(const fs::path& path, const std::vector<mad::EpochStats>& h) {
  std::string text;
  for (const auto& e : h) text += epoch_json(e).dump() + "\n";
  write_text_atomic(path.string(), text);
}

std::string file_label(const std::string& kind, double value) {
  if (kind == "none") return "none";
  std::string v = report::format_number(value);
  return kind + "_" + v;
}

// ---- run context ------------------------------------------------------

struct Ctx {
  cfg::RunConfig config;
  fs::path dir;
  fs::path data_dir;
  RunOptions opts;
  RunRecord* rec = nullptr;
  std::set<std::string> stages;
  bool interrupted = false;
  bool halt_used = false;

  std::optional<Dataset> train, val;
  std::optional<poison::TrainingSplit> split;

  void log(const std::string& msg) const {
    if (opts.log) opts.log("[" + rec->run_id + "] " + msg);
  }
  const Dataset& train_set() {
    if (!train) train = io::load_dataset((data_dir / "train.json").string());
    return *train;
  }
  const Dataset& val_set() {
    if (!val) val = io::load_dataset((data_dir / "val.json").string());
    return *val;
  }
};

std::optional<fs::path> model_path(const Ctx& ctx, const std::string& tag) {
  static const std::map<std::string, std::pair<std::string, std::string>> where{
      {"clean", {"clean.checkpoint", "clean"}},
      {"bod", {"backdoor.checkpoint", "backdoor"}},
      {"rd", {"mad.checkpoint", "mad"}}};
  const auto& [key, stage] = where.at(tag);
  const std::string& ext = ctx.config.get_string(key);
  if (!ext.empty()) return fs::path(ext);
  const fs::path own = ctx.dir / stage / "model.json";
  if (ctx.stages.count(stage) || fs::exists(own)) return own;
  return std::nullopt;
}

det::DetectorParams load_model(const Ctx& ctx, const std::string& tag) {
  const auto p = model_path(ctx, tag);
  if (!p || !fs::exists(*p)) throw ConfigError("model '" + tag + "' is not available for this run");
  const det::DetectorConfig mc = model_config(ctx.config);
  return det::load_checkpoint(p->string(), &mc).params;
}

template <class Body>
void run_stage(Ctx& ctx, const std::string& name, Body body) {
  if (ctx.interrupted || !ctx.stages.count(name)) return;
  const fs::path sd = ctx.dir / name;
  if (fs::exists(sd / "DONE")) {
    ctx.rec->stages_skipped.push_back(name);
    return;
  }
  fs::create_directories(sd);
  ctx.log("stage " + name);
  try {
    body(sd);
  } catch (...) {
    ctx.rec->failed_stage = name;
    throw;
  }
  if (ctx.interrupted) return;
  write_text_atomic((sd / "DONE").string(), "done\n");
  ctx.rec->stages_run.push_back(name);
}

using TrainFn = std::function<mad::TrainedModel(const mad::TrainHooks&)>;

void train_stage(Ctx& ctx, const fs::path& sd, int epochs, const TrainFn& fn) {
  const det::DetectorConfig mc = model_config(ctx.config);
  mad::TrainState resume;
  mad::TrainHooks hooks;
  const fs::path state_p = sd / "state.json", vel_p = sd / "velocity.json";
  if (fs::exists(state_p) && fs::exists(vel_p)) {
    auto st = det::load_checkpoint(state_p.string(), &mc);
    const json meta = json::parse(st.meta_json);
    resume.params = std::move(st.params);
    resume.velocity = det::load_checkpoint(vel_p.string(), &mc).params;
    resume.epochs_done = meta.at("epochs_done").get<int>();
    resume.history = history_from(meta.at("history"));
    hooks.resume = &resume;
    ctx.log("resuming after epoch " + std::to_string(resume.epochs_done));
  }
  hooks.on_epoch_end = [&](const mad::TrainState& s) {
    const json meta = {{"epochs_done", s.epochs_done}, {"history", history_json(s.history)}};
    det::save_checkpoint(state_p.string(), s.params, meta.dump());
    det::save_checkpoint(vel_p.string(), s.velocity, "{}");
    write_history_jsonl(sd / "history.jsonl", s.history);
    const auto& e = s.history.back();
    ctx.log("epoch " + std::to_string(e.epoch + 1) + "/" + std::to_string(epochs) +
            " loss=" + report::format_number(e.loss));
  };
  if (ctx.opts.halt_after_epochs && !ctx.halt_used) {
    hooks.halt_after = *ctx.opts.halt_after_epochs;
    ctx.halt_used = true;
  }
  mad::TrainedModel m = fn(hooks);
  if (static_cast<int>(m.history.size()) < epochs) {
    ctx.interrupted = true;
    return;
  }
  const json meta = {{"regime", mad::regime_name(m.regime)},
                     {"config_digest", m.config_digest},
                     {"history", history_json(m.history)}};
  det::save_checkpoint((sd / "model.json").string(), m.params, meta.dump());
  write_history_jsonl(sd / "history.jsonl", m.history);
}

const poison::TrainingSplit& training_split(Ctx& ctx) {
  if (ctx.split) return *ctx.split;
  const fs::path pd = ctx.dir / "poison";
  if (!fs::exists(pd / "DONE")) throw ConfigError("poisoned training set is not available (poison stage missing)");
  poison::PoisonResult res;
  res.dataset = io::load_dataset((pd / "train.json").string());
  res.report = poison::report_from_json(read_text((pd / "report.json").string()));
  ctx.split = poison::split_for_training(ctx.train_set(), res);
  return *ctx.split;
}

mad::LabeledImage labeled(Image img, std::vector<det::Annotation> anns) { return {std::move(img), std::move(anns)}; }

void eval_stage(Ctx& ctx, const fs::path& sd) {
  const cfg::RunConfig& c = ctx.config;
  const Dataset& val = ctx.val_set();
  const poison::TriggerSpec trig = trigger_spec(c, true);
  const poison::PoisonConfig pc = poison_config(c);
  poison::EvalSplits splits = poison::build_eval_splits(val, trig, pc);
  for (auto& s : splits.attacked) quantize_u8(s.image);

  eval::EvalConfig ec;
  ec.iou = c.get_double("eval.iou");
  ec.asr_conf = c.get_double("eval.conf");
  ec.ap_conf = c.get_double("eval.ap_conf");
  ec.nms_iou = c.get_double("eval.nms_iou");
  ec.target_class = pc.target_class;
  ec.all_object = pc.all_object_attack;

  std::map<std::string, det::DetectorParams> models;
  for (const auto& tag : kModelTags) {
    const auto p = model_path(ctx, tag);
    if (p && fs::exists(*p)) models.emplace(tag, load_model(ctx, tag));
  }
  if (models.empty()) throw ConfigError("eval stage found no trained model");

  json index = json::array();
  json buckets = json::object();
  const auto points = noise_points(c);
  for (const auto& tag : kModelTags) {
    auto it = models.find(tag);
    if (it == models.end()) continue;
    for (const auto& pt : points) {
      ec.noise = pt.spec;
      const eval::MetricsReport rep = eval::evaluate_full(it->second, splits, ec);
      const std::string rel = "eval/" + tag + "__" + file_label(pt.kind, pt.value) + ".json";
      write_text_atomic((ctx.dir / rel).string(), rep.to_json());
      index.push_back({{"model", tag}, {"kind", pt.kind}, {"value", pt.value}, {"file", rel}});
      ctx.rec->reports[tag + "__" + file_label(pt.kind, pt.value)] = (ctx.dir / rel).string();
    }
    const Dataset& bucket_set = splits.attacked.empty() ? splits.benign : splits.attacked;
    const eval::ScoreBuckets b = eval::scoreb_buckets(it->second, bucket_set, pc.target_class);
    buckets[tag] = {{"low", b.low}, {"mid", b.mid}, {"high", b.high}, {"cells", b.cells}};
  }
  write_text_atomic((sd / "index.json").string(), index.dump(2));
  write_text_atomic((sd / "scoreb.json").string(), buckets.dump(2));

  // Loss-change tables against the clean labels y.
  mad::LossChangeInputs lc;
  for (const auto& s : splits.benign) lc.clean.push_back(labeled(s.image, s.anns));
  noise::NoiseSpec lcn;
  lcn.kind = noise::parse_kind(c.get_string("eval.loss_change_noise"));
  lcn.value = c.get_double("eval.loss_change_value");
  lcn.angle = c.get_double("eval.motion_angle");
  lcn.region = noise::parse_region(c.get_string("eval.noise_region"));
  lcn.validate();
  for (std::size_t i = 0; i < splits.attacked.size(); ++i) {
    const auto& y = val[splits.attacked_source[i]].anns;
    lc.poisoned.push_back(labeled(splits.attacked[i].image, y));
    noise::NoiseSpec s = lcn;
    s.seed = derive_seed(static_cast<std::uint64_t>(c.get_int("eval.noise_seed")), "loss_change" + std::to_string(i));
    lc.poisoned_noise.push_back(labeled(noise::apply(splits.attacked[i].image, s, splits.attacked_regions[i]), y));
  }
  json summary = json::object();
  const det::LossWeights lw = loss_weights(c);
  for (const auto& after : {std::string("bod"), std::string("rd")}) {
    if (!models.count("clean") || !models.count(after)) continue;
    const auto rows = mad::loss_change_report(models.at("clean"), models.at(after), lc, lw);
    report::CsvTable t{{"set", "index", "before", "after"}, {}};
    for (const auto& r : rows) {
      t.rows.push_back({mad::loss_set_name(r.set), std::to_string(r.index), report::format_number(r.before),
                        report::format_number(r.after)});
    }
    write_text_atomic((sd / ("loss_change__clean_" + after + ".csv")).string(), t.str());
    json m = json::object();
    for (auto set : {mad::LossSet::kClean, mad::LossSet::kPoisoned, mad::LossSet::kPoisonedNoise}) {
      const double v = mad::median_delta(rows, set);
      m[mad::loss_set_name(set)] = std::isnan(v) ? json(nullptr) : json(v);
    }
    summary["clean_" + after] = m;
  }
  write_text_atomic((sd / "loss_change_summary.json").string(), summary.dump(2));
}

// Sweep keys that invalidate a shared stage.
bool touches(const std::vector<cfg::SweepAxis>& axes, std::initializer_list<const char*> prefixes) {
  for (const auto& ax : axes) {
    for (const char* p : prefixes) {
      if (ax.key == "run.seed" || ax.key.rfind(p, 0) == 0) return true;
    }
  }
  return false;
}

std::string headline_model(const fs::path& run_dir) {
  std::set<std::string> have;
  for (const auto& e : load_eval_index(run_dir.string())) have.insert(e.model);
  for (auto it = kModelTags.rbegin(); it != kModelTags.rend(); ++it) {
    if (have.count(*it)) return *it;
  }
  return "";
}

void write_sweep_report(const fs::path& dir, const fs::path& out) {
  const fs::path idx = dir / "sweep" / "index.json";
  if (!fs::exists(idx)) return;
  const json points = json::parse(read_text(idx.string()));
  std::vector<std::string> keys;
  if (!points.empty()) {
    for (auto it = points[0].at("values").begin(); it != points[0].at("values").end(); ++it) keys.push_back(it.key());
  }
  report::CsvTable t;
  t.header = {"point"};
  t.header.insert(t.header.end(), keys.begin(), keys.end());
  for (const char* h : {"model", "ap_b", "map_b", "ap_ab", "map_ab", "asr"}) t.header.push_back(h);
  std::vector<double> asr;
  bool asr_complete = true;
  for (const auto& p : points) {
    const fs::path child = p.at("dir").get<std::string>();
    const std::string model = headline_model(child);
    std::vector<std::string> row{std::to_string(p.at("point").get<int>())};
    for (const auto& k : keys) row.push_back(p.at("values").at(k).dump());
    row.push_back(model);
    const eval::MetricsReport r = load_metrics((child / "eval" / (model + "__none.json")).string());
    for (double v : {r.ap_b, r.map_b, r.ap_ab, r.map_ab}) row.push_back(report::format_number(v));
    row.push_back(report::format_optional(r.asr));
    if (r.asr) {
      asr.push_back(*r.asr);
    } else {
      asr_complete = false;
    }
    t.rows.push_back(std::move(row));
  }
  write_text_atomic((out / "sweep.csv").string(), t.str());
  json trend = {{"keys", keys}, {"asr", asr}};
  trend["nondecreasing_one_inversion_2pt"] =
      asr_complete && report::nondecreasing_with_tolerance(asr, 1, 0.02);
  write_text_atomic((out / "trend.json").string(), trend.dump(2));
}

}  // namespace

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + tmp);
    out << text;
  }
  fs::rename(tmp, path);
}

std::string RunRecord::to_json() const {
  json j;
  j["run_id"] = run_id;
  j["run_dir"] = run_dir;
  j["config_digest"] = config_digest;
  j["seed"] = seed;
  j["status"] = status;
  j["failed_stage"] = failed_stage;
  j["error"] = error;
  j["stages_run"] = stages_run;
  j["stages_skipped"] = stages_skipped;
  j["checkpoints"] = checkpoints;
  j["reports"] = reports;
  j["sweep_dirs"] = sweep_dirs;
  j["wall_seconds"] = wall_seconds;
  j["source_digest"] = source_digest;
  return j.dump(2);
}

std::vector<EvalEntry> load_eval_index(const std::string& run_dir) {
  const fs::path p = fs::path(run_dir) / "eval" / "index.json";
  std::vector<EvalEntry> out;
  if (!fs::exists(p)) return out;
  try {
    for (const auto& e : json::parse(read_text(p.string()))) {
      out.push_back({e.at("model").get<std::string>(), e.at("kind").get<std::string>(),
                     e.at("value").get<double>(), e.at("file").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
  return out;
}

eval::MetricsReport load_metrics(const std::string& path) {
  return eval::MetricsReport::from_json(read_text(path));
}

void emit_report(const std::string& run_dir) {
  const fs::path dir(run_dir), out = dir / "report";
  fs::create_directories(out);
  const auto index = load_eval_index(run_dir);

  json headline = json::object();
  std::vector<std::string> models;
  for (const auto& e : index) {
    if (e.kind != "none") continue;
    models.push_back(e.model);
    headline[e.model] = json::parse(read_text((dir / e.file).string()));
  }
  write_text_atomic((out / "metrics.json").string(), headline.dump(2));

  for (const auto& kind : kNoiseKinds) {
    report::CsvTable t{{"method", "value", "ap_ab", "map_ab", "asr"}, {}};
    const double neutral = (kind == "motion_blur" || kind == "light") ? 1.0 : 0.0;
    for (const auto& m : models) {
      for (const auto& e : index) {
        if (e.model != m) continue;
        if (e.kind != kind && e.kind != "none") continue;
        const eval::MetricsReport r = load_metrics((dir / e.file).string());
        t.rows.push_back({m, report::format_number(e.kind == "none" ? neutral : e.value),
                          report::format_number(r.ap_ab), report::format_number(r.map_ab),
                          report::format_optional(r.asr)});
      }
    }
    write_text_atomic((out / ("noise_" + kind + ".csv")).string(), t.str());
  }

  report::CsvTable sb{{"model", "low", "mid", "high"}, {}};
  if (fs::exists(dir / "eval" / "scoreb.json")) {
    const json b = json::parse(read_text((dir / "eval" / "scoreb.json").string()));
    for (auto it = b.begin(); it != b.end(); ++it) {
      sb.rows.push_back({it.key(), it.value().at("low").dump(), it.value().at("mid").dump(),
                         it.value().at("high").dump()});
    }
  }
  write_text_atomic((out / "scoreb.csv").string(), sb.str());

  for (const char* pair : {"clean_bod", "clean_rd"}) {
    const fs::path src = dir / "eval" / (std::string("loss_change__") + pair + ".csv");
    if (fs::exists(src)) write_text_atomic((out / (std::string("loss_change_") + pair + ".csv")).string(), read_text(src.string()));
  }
  write_sweep_report(dir, out);

  std::ostringstream sum;
  sum << "run: " << dir.filename().string() << "\n";
  for (const auto& m : models) {
    const json& h = headline[m];
    sum << m << ": AP_b=" << h["ap_b"].dump() << " mAP_b=" << h["map_b"].dump()
        << " AP_ab=" << h["ap_ab"].dump() << " mAP_ab=" << h["map_ab"].dump() << " mAP_a=" << h["map_a"].dump()
        << " ASR=" << h["asr"].dump() << "\n";
  }
  if (fs::exists(dir / "eval" / "loss_change_summary.json")) {
    const json lc = json::parse(read_text((dir / "eval" / "loss_change_summary.json").string()));
    for (auto it = lc.begin(); it != lc.end(); ++it) {
      sum << "loss change " << it.key() << ": median delta clean=" << it.value()["clean"].dump()
          << " poisoned=" << it.value()["poisoned"].dump()
          << " poisoned_noise=" << it.value()["poisoned_noise"].dump() << "\n";
    }
  }
  if (fs::exists(out / "sweep.csv")) sum << "sweep:\n" << read_text((out / "sweep.csv").string());
  write_text_atomic((out / "summary.txt").string(), sum.str());
}

RunRecord run_experiment(const std::string& config_path, const std::string& run_dir, const RunOptions& opts) {
  return run_experiment(cfg::RunConfig::load(config_path), run_dir, opts);
}

RunRecord run_experiment(const cfg::RunConfig& config, const std::string& run_dir, const RunOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = fs::absolute(run_dir);
  fs::create_directories(dir);

  RunRecord rec;
  rec.run_id = dir.filename().string();
  rec.run_dir = dir.string();
  rec.config_digest = config.digest();
  rec.seed = static_cast<std::uint64_t>(config.get_int("run.seed"));
  rec.source_digest = RBA_SOURCE_DIGEST;

  const fs::path cfg_path = dir / "config.json";
  if (fs::exists(cfg_path)) {
    cfg::RunConfig stored = cfg::RunConfig::load(cfg_path.string());
    stored.set("pipeline.stages", config.get_string("pipeline.stages"));
    if (stored != config) {
      throw ConfigError("run directory " + dir.string() + " already holds a different config");
    }
  } else {
    write_text_atomic(cfg_path.string(), config.to_json());
  }

  Ctx ctx;
  ctx.config = config;
  ctx.dir = dir;
  ctx.opts = opts;
  ctx.rec = &rec;
  ctx.stages = parse_stages(config.get_string("pipeline.stages"));
  const std::string& ext_data = config.get_string("data.dir");
  ctx.data_dir = ext_data.empty() ? dir / "data" : fs::absolute(ext_data);
  if (!ext_data.empty()) ctx.stages.erase("data");

  const auto& axes = config.sweep();
  std::set<std::string> child_stages = ctx.stages;
  if (!axes.empty()) {
    const bool share_clean = !touches(axes, {"data.", "model.", "loss.", "clean."});
    const bool share_backdoor =
        share_clean && !touches(axes, {"poison.", "trigger.", "backdoor."});
    std::set<std::string> parent;
    for (const auto& s : ctx.stages) {
      const bool shared = s == "data" || (s == "clean" && share_clean) ||
                          ((s == "poison" || s == "backdoor") && share_backdoor);
      if (shared) {
        parent.insert(s);
        child_stages.erase(s);
      }
    }
    if (ctx.stages.count("report")) parent.insert("report");
    ctx.stages = parent;
    ctx.stages.erase("report");
  }

  auto finish = [&](const std::string& status) {
    rec.status = status;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& tag : kModelTags) {
      const auto p = model_path(ctx, tag);
      if (p && fs::exists(*p)) rec.checkpoints[tag] = p->string();
    }
    write_text_atomic((dir / "run_record.json").string(), rec.to_json());
    json st = {{"status", status}, {"stage", rec.failed_stage}, {"error", rec.error}};
    write_text_atomic((dir / "status.json").string(), st.dump(2));
  };

  try {
    const cfg::RunConfig& c = config;
    run_stage(ctx, "data", [&](const fs::path& sd) {
      const auto set = synth::generate_synthetic(scene_spec(c), static_cast<int>(c.get_int("data.n_train")),
                                                 static_cast<int>(c.get_int("data.n_val")),
                                                 derive_seed(rec.seed, "data"));
      io::save_dataset(set.train, sd.string(), "train.json");
      io::save_dataset(set.val, sd.string(), "val.json");
    });

    run_stage(ctx, "clean", [&](const fs::path& sd) {
      if (!c.get_string("clean.checkpoint").empty()) throw ConfigError("clean.checkpoint is set; drop the clean stage");
      const auto tc = train_config(c, "clean", mad::Regime::kClean);
      const auto mc = model_config(c);
      train_stage(ctx, sd, tc.epochs, [&](const mad::TrainHooks& h) {
        return mad::train_clean(ctx.train_set(), tc, mc, h);
      });
    });

    run_stage(ctx, "poison", [&](const fs::path& sd) {
      const Dataset& train = ctx.train_set();
      poison::PoisonResult res = poison::poison_dataset(train, trigger_spec(c, false), poison_config(c));
      std::set<std::int64_t> poisoned;
      for (const auto& im : res.report.images) poisoned.insert(im.image_id);
      for (auto& s : res.dataset) {
        if (poisoned.count(s.image_id)) continue;
        s.file_name = fs::relative(ctx.data_dir / s.file_name, sd).generic_string();
      }
      io::save_dataset(res.dataset, sd.string(), "train.json");
      write_text_atomic((sd / "report.json").string(), poison::report_to_json(res.report));
    });

    run_stage(ctx, "backdoor", [&](const fs::path& sd) {
      if (!c.get_string("backdoor.checkpoint").empty()) throw ConfigError("backdoor.checkpoint is set; drop the backdoor stage");
      const auto tc = train_config(c, "backdoor", mad::Regime::kBackdoor);
      const auto mc = model_config(c);
      std::optional<det::DetectorParams> init;
      if (const auto p = model_path(ctx, "clean"); p && fs::exists(*p)) init = load_model(ctx, "clean");
      const auto& split = training_split(ctx);
      train_stage(ctx, sd, tc.epochs, [&](const mad::TrainHooks& h) {
        return mad::train_backdoor(split.clean, split.poisoned, tc, init ? &*init : nullptr, mc, h);
      });
    });

    run_stage(ctx, "mad", [&](const fs::path& sd) {
      if (!c.get_string("mad.checkpoint").empty()) throw ConfigError("mad.checkpoint is set; drop the mad stage");
      const auto tc = train_config(c, "mad", mad::Regime::kMad);
      mad::TrainedModel bod;
      bod.params = load_model(ctx, "bod");
      bod.regime = mad::Regime::kBackdoor;
      const auto budget = attack_budget(c);
      const auto& split = training_split(ctx);
      train_stage(ctx, sd, tc.epochs, [&](const mad::TrainHooks& h) {
        return mad::train_mad(bod, split.clean, split.poisoned, budget, tc, h);
      });
    });

    run_stage(ctx, "eval", [&](const fs::path& sd) { eval_stage(ctx, sd); });

    if (!axes.empty() && !ctx.interrupted) {
      json index = json::array();
      const auto pts = config.expand();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        cfg::RunConfig child = pts[i].config;
        child.set("data.dir", ctx.data_dir.string());
        std::set<std::string> st = child_stages;
        if (!st.count("clean") && ctx.stages.count("clean")) child.set("clean.checkpoint", (dir / "clean" / "model.json").string());
        if (!st.count("backdoor") && ctx.stages.count("backdoor")) {
          child.set("backdoor.checkpoint", (dir / "backdoor" / "model.json").string());
        }
        if (st.count("mad") && !st.count("poison")) st.insert("poison");
        child.set("pipeline.stages", join_stages(st));
        const fs::path cd = dir / "sweep" / std::to_string(i);
        ctx.log("sweep point " + std::to_string(i) + ": " + pts[i].label);
        RunRecord cr = run_experiment(child, cd.string(), opts);
        rec.sweep_dirs.push_back(cd.string());
        json values = json::object();
        for (const auto& ax : axes) values[ax.key] = json::parse(cfg::value_to_string(pts[i].config.get(ax.key)));
        index.push_back({{"point", static_cast<int>(i)}, {"label", pts[i].label}, {"dir", cd.string()}, {"values", values}});
        if (cr.status != "completed") {
          ctx.interrupted = true;
          break;
        }
      }
      write_text_atomic((dir / "sweep" / "index.json").string(), index.dump(2));
      if (child_stages.count("report")) ctx.stages.insert("report");
    }

    run_stage(ctx, "report", [&](const fs::path&) { emit_report(dir.string()); });
  } catch (const std::exception& e) {
    rec.error = e.what();
    if (rec.failed_stage.empty()) rec.failed_stage = "setup";
    finish("failed");
    throw;
  }
  finish(ctx.interrupted ? "interrupted" : "completed");
  return rec;
}

}  // namespace rba::exp

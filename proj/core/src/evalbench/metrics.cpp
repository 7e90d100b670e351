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

#include "rba/evalbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "rba/errors.hpp"
#include "rba/hash.hpp"

namespace rba::eval {
namespace {

using nlohmann::json;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::set<int> classes_with_gts(std::span<const GtList> gts) {
  std::set<int> out;
  for (const auto& g : gts) {
    for (const auto& a : g) out.insert(a.cls);
  }
  return out;
}

// Per-class AP over classes that have at least one ground truth.
std::map<int, double> per_class_ap(std::span<const DetList> dets, std::span<const GtList> gts,
                                   double iou_thr) {
  std::map<int, double> out;
  for (int c : classes_with_gts(gts)) out[c] = average_precision(dets, gts, c, iou_thr).value_or(0.0);
  return out;
}

std::optional<double> mean_of(const std::map<int, double>& m) {
  if (m.empty()) return std::nullopt;
  double s = 0;
  for (const auto& [c, v] : m) s += v;
  return s / static_cast<double>(m.size());
}

std::vector<Image> noised(const Dataset& d, const std::vector<std::vector<poison::PixelRect>>* regions,
                          const std::optional<noise::NoiseSpec>& spec, const std::string& split) {
  std::vector<Image> out;
  out.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!spec || spec->neutral()) {
      out.push_back(d[i].image);
      continue;
    }
    noise::NoiseSpec s = *spec;
    s.seed = derive_seed(spec->seed, split + std::to_string(i));
    std::span<const poison::PixelRect> r;
    if (regions) r = (*regions)[i];
    out.push_back(noise::apply(d[i].image, s, r));
  }
  return out;
}

std::vector<GtList> gts_of(const Dataset& d) {
  std::vector<GtList> out;
  out.reserve(d.size());
  for (const auto& s : d) out.push_back(s.anns);
  return out;
}

json map_json(const std::map<int, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[std::to_string(k)] = v;
  return j;
}

std::map<int, double> map_from(const json& j) {
  std::map<int, double> m;
  for (auto it = j.begin(); it != j.end(); ++it) m[std::stoi(it.key())] = it.value().get<double>();
  return m;
}

}  // namespace

std::optional<double> average_precision(std::span<const DetList> dets, std::span<const GtList> gts,
                                        int cls, double iou_thr, std::vector<MatchRecord>* matches) {
  if (dets.size() != gts.size()) throw ConfigError("average_precision: image count mismatch");
  struct Ref {
    double score;
    std::size_t image;
    int idx;
  };
  std::vector<Ref> order;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t k = 0; k < dets[i].size(); ++k) {
      if (dets[i][k].cls == cls) order.push_back({dets[i][k].score, i, static_cast<int>(k)});
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const Ref& a, const Ref& b) { return a.score > b.score; });

  std::size_t npos = 0;
  std::vector<std::vector<int>> matched(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    matched[i].assign(gts[i].size(), -1);
    npos += static_cast<std::size_t>(
        std::count_if(gts[i].begin(), gts[i].end(), [&](const auto& a) { return a.cls == cls; }));
  }
  std::vector<std::vector<double>> match_iou(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) match_iou[i].assign(gts[i].size(), 0.0);

  std::vector<char> tp(order.size(), 0);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& d = dets[order[r].image][order[r].idx];
    const auto& g = gts[order[r].image];
    double best = -1;
    int best_j = -1;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (g[j].cls != cls || matched[order[r].image][j] >= 0) continue;
      const double v = det::iou(d.box, g[j].box);
      if (v > best) {
        best = v;
        best_j = static_cast<int>(j);
      }
    }
    if (best_j >= 0 && best >= iou_thr) {
      tp[r] = 1;
      matched[order[r].image][best_j] = order[r].idx;
      match_iou[order[r].image][best_j] = best;
    }
  }

  if (matches) {
    matches->clear();
    for (std::size_t i = 0; i < gts.size(); ++i) {
      for (std::size_t j = 0; j < gts[i].size(); ++j) {
        if (gts[i][j].cls != cls) continue;
        MatchRecord m;
        m.image = i;
        m.gt = j;
        m.det = matched[i][j];
        if (m.det >= 0) {
          m.iou = match_iou[i][j];
          m.score = dets[i][m.det].score;
        }
        matches->push_back(m);
      }
    }
  }

  if (npos == 0) return order.empty() ? std::nullopt : std::optional<double>(0.0);
  if (order.empty()) return 0.0;

  std::vector<double> prec(order.size()), rec(order.size());
  std::size_t ctp = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    ctp += tp[r];
    prec[r] = static_cast<double>(ctp) / static_cast<double>(r + 1);
    rec[r] = static_cast<double>(ctp) / static_cast<double>(npos);
  }
  for (std::size_t r = order.size() - 1; r-- > 0;) prec[r] = std::max(prec[r], prec[r + 1]);
  double ap = 0, prev_r = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    ap += (rec[r] - prev_r) * prec[r];
    prev_r = rec[r];
  }
  return ap;
}

AsrResult attack_success_rate(std::span<const DetList> dets_on_attacked,
                              std::span<const poison::AttackedObject> objects, int target_class,
                              double conf_thr, double iou_thr) {
  if (objects.empty()) throw MetricUndefined("ASR is undefined without attacked objects");
  AsrResult res;
  for (const auto& o : objects) {
    if (o.image_index >= dets_on_attacked.size()) {
      throw ConfigError("attack_success_rate: attacked object refers to a missing image");
    }
    const int cls = target_class >= 0 ? target_class : o.original.cls;
    bool survived = false;
    for (const auto& d : dets_on_attacked[o.image_index]) {
      if (d.cls == cls && d.score >= conf_thr && det::iou(d.box, o.original.box) >= iou_thr) {
        survived = true;
        break;
      }
    }
    auto& pc = res.per_class[o.original.cls];
    ++pc[1];
    ++res.attacked;
    if (!survived) {
      ++pc[0];
      ++res.successes;
    }
  }
  res.asr = static_cast<double>(res.successes) / static_cast<double>(res.attacked);
  return res;
}

std::vector<DetList> detect_all(const det::DetectorParams& params, std::span<const Image> images,
                                double conf, double nms_iou) {
  const det::DetectorParams frozen = params.clone(false);
  std::vector<DetList> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(det::detect(frozen, img, conf, nms_iou));
  return out;
}

MetricsReport evaluate_full(const det::DetectorParams& params, const poison::EvalSplits& splits,
                            const EvalConfig& cfg) {
  if (splits.attacked_regions.size() != splits.attacked.size()) {
    throw ConfigError("evaluate_full: attacked regions do not match the attacked split");
  }
  if (cfg.noise) cfg.noise->validate();
  MetricsReport rep;
  rep.config = cfg;
  rep.noise_label = cfg.noise ? cfg.noise->label() : "none";

  const auto img_b = noised(splits.benign, nullptr, cfg.noise, "b");
  const auto img_a = noised(splits.attacked, &splits.attacked_regions, cfg.noise, "a");
  const auto det_b = detect_all(params, img_b, cfg.ap_conf, cfg.nms_iou);
  const auto det_a = detect_all(params, img_a, cfg.ap_conf, cfg.nms_iou);
  const auto gt_b = gts_of(splits.benign);
  const auto gt_a = gts_of(splits.attacked);

  std::vector<DetList> det_ab = det_b;
  det_ab.insert(det_ab.end(), det_a.begin(), det_a.end());
  std::vector<GtList> gt_ab = gt_b;
  gt_ab.insert(gt_ab.end(), gt_a.begin(), gt_a.end());

  rep.per_class_b = per_class_ap(det_b, gt_b, cfg.iou);
  rep.per_class_a = per_class_ap(det_a, gt_a, cfg.iou);
  rep.per_class_ab = per_class_ap(det_ab, gt_ab, cfg.iou);
  rep.ap_b = average_precision(det_b, gt_b, cfg.target_class, cfg.iou).value_or(0.0);
  rep.ap_ab = average_precision(det_ab, gt_ab, cfg.target_class, cfg.iou).value_or(0.0);
  rep.map_b = mean_of(rep.per_class_b).value_or(0.0);
  rep.map_a = mean_of(rep.per_class_a);
  rep.map_ab = mean_of(rep.per_class_ab).value_or(0.0);

  rep.images_b = splits.benign.size();
  rep.images_a = splits.attacked.size();
  rep.boxes_b = count_boxes(splits.benign);
  rep.boxes_a = count_boxes(splits.attacked);
  rep.attacked_objects = splits.attacked_objects.size();
  if (!splits.attacked_objects.empty()) {
    const AsrResult a = attack_success_rate(det_a, splits.attacked_objects,
                                            cfg.all_object ? -1 : cfg.target_class, cfg.asr_conf,
                                            cfg.iou);
    rep.asr = a.asr;
    for (const auto& [c, v] : a.per_class) {
      rep.asr_per_class[c] = static_cast<double>(v[0]) / static_cast<double>(v[1]);
    }
  }
  return rep;
}

std::string MetricsReport::to_json() const {
  json j;
  j["ap_b"] = ap_b;
  j["map_b"] = map_b;
  j["map_a"] = map_a ? json(*map_a) : json(nullptr);
  j["ap_ab"] = ap_ab;
  j["map_ab"] = map_ab;
  j["asr"] = asr ? json(*asr) : json(nullptr);
  j["per_class_b"] = map_json(per_class_b);
  j["per_class_a"] = map_json(per_class_a);
  j["per_class_ab"] = map_json(per_class_ab);
  j["asr_per_class"] = map_json(asr_per_class);
  j["noise"] = noise_label;
  j["config"] = {{"iou", config.iou},
                 {"ap_conf", config.ap_conf},
                 {"asr_conf", config.asr_conf},
                 {"nms_iou", config.nms_iou},
                 {"target_class", config.target_class},
                 {"all_object", config.all_object}};
  j["counts"] = {{"images_b", images_b},
                 {"images_a", images_a},
                 {"boxes_b", boxes_b},
                 {"boxes_a", boxes_a},
                 {"attacked_objects", attacked_objects}};
  return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  MetricsReport r;
  try {
    const json j = json::parse(text);
    r.ap_b = j.at("ap_b").get<double>();
    r.map_b = j.at("map_b").get<double>();
    if (!j.at("map_a").is_null()) r.map_a = j.at("map_a").get<double>();
    r.ap_ab = j.at("ap_ab").get<double>();
    r.map_ab = j.at("map_ab").get<double>();
    if (!j.at("asr").is_null()) r.asr = j.at("asr").get<double>();
    r.per_class_b = map_from(j.at("per_class_b"));
    r.per_class_a = map_from(j.at("per_class_a"));
    r.per_class_ab = map_from(j.at("per_class_ab"));
    r.asr_per_class = map_from(j.at("asr_per_class"));
    r.noise_label = j.at("noise").get<std::string>();
    const json& c = j.at("config");
    r.config.iou = c.at("iou").get<double>();
    r.config.ap_conf = c.at("ap_conf").get<double>();
    r.config.asr_conf = c.at("asr_conf").get<double>();
    r.config.nms_iou = c.at("nms_iou").get<double>();
    r.config.target_class = c.at("target_class").get<int>();
    r.config.all_object = c.at("all_object").get<bool>();
    const json& n = j.at("counts");
    r.images_b = n.at("images_b").get<std::size_t>();
    r.images_a = n.at("images_a").get<std::size_t>();
    r.boxes_b = n.at("boxes_b").get<std::size_t>();
    r.boxes_a = n.at("boxes_a").get<std::size_t>();
    r.attacked_objects = n.at("attacked_objects").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("metrics report: ") + e.what());
  }
  return r;
}

ScoreBuckets scoreb_buckets(std::span<const std::vector<double>> heads, const det::DetectorConfig& cfg,
                            int target_class) {
  if (heads.empty()) throw ConfigError("scoreb_buckets: empty dataset");
  if (target_class < 0 || target_class >= cfg.num_classes) {
    throw ConfigError("scoreb_buckets: target class out of range");
  }
  const int k = cfg.head_channels();
  const std::size_t cells = static_cast<std::size_t>(cfg.grid_side()) * cfg.grid_side();
  std::size_t low = 0, mid = 0, high = 0;
  for (const auto& h : heads) {
    if (h.size() != cells * k) throw ConfigError("scoreb_buckets: head size mismatch");
    for (std::size_t c = 0; c < cells; ++c) {
      const double s = sigmoid(h[c * k + det::kObj]) * sigmoid(h[c * k + det::kCls0 + target_class]);
      if (s <= 0.1) {
        ++low;
      } else if (s <= 0.5) {
        ++mid;
      } else {
        ++high;
      }
    }
  }
  ScoreBuckets b;
  b.cells = low + mid + high;
  const double n = static_cast<double>(b.cells);
  b.low = 100.0 * low / n;
  b.mid = 100.0 * mid / n;
  b.high = 100.0 * high / n;
  return b;
}

ScoreBuckets scoreb_buckets(const det::DetectorParams& params, const Dataset& dataset, int target_class) {
  const det::DetectorParams frozen = params.clone(false);
  std::vector<std::vector<double>> heads;
  heads.reserve(dataset.size());
  for (const auto& s : dataset) {
    const grad::Tensor head = det::forward(frozen, s.image).head;
    heads.emplace_back(head.data().begin(), head.data().end());
  }
  return scoreb_buckets(heads, params.config, target_class);
}

}  // namespace rba::eval

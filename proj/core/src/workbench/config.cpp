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


#include "rba/workbench/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rba/errors.hpp"
#include "rba/hash.hpp"

namespace rba::cfg {
namespace {

using nlohmann::json;
using List = std::vector<double>;

const std::map<std::string, Value>& registry() {
  static const std::map<std::string, Value> r = {
      {"run.seed", std::int64_t{7}},
      {"pipeline.stages", std::string("data,clean,poison,backdoor,mad,eval,report")},

      {"data.dir", std::string()},
      {"data.n_train", std::int64_t{2000}},
      {"data.n_val", std::int64_t{400}},
      {"data.image_side", std::int64_t{64}},
      {"data.min_objects", std::int64_t{1}},
      {"data.max_objects", std::int64_t{3}},
      {"data.min_size", 0.15},
      {"data.max_size", 0.5},
      {"data.class_weights", List{0.55, 0.15, 0.15, 0.15}},

      {"model.channels", List{8, 16, 16, 32, 32, 64, 64}},
      {"model.anchor", 0.25},

      {"loss.cls", 0.5},
      {"loss.box", 0.05},
      {"loss.obj", 1.0},

      {"clean.checkpoint", std::string()},
      {"clean.epochs", std::int64_t{45}},
      {"clean.batch_size", std::int64_t{16}},
      {"clean.lr", 0.02},
      {"clean.momentum", 0.9},
      {"clean.weight_decay", 5e-4},

      {"poison.rate", 0.1},
      {"poison.target_class", std::int64_t{0}},
      {"poison.all_object", false},
      {"poison.rule", std::string("remove")},
      {"poison.relabel_class", std::int64_t{0}},
      {"poison.seed", std::int64_t{1}},

      {"trigger.bitmap", std::string()},
      {"trigger.mode", std::string("variable")},
      {"trigger.rho_w", 0.4},
      {"trigger.rho_h", 0.4},
      {"trigger.lambda", 1.0},
      {"trigger.fixed_size", std::int64_t{12}},
      {"trigger.placement", std::string("center")},
      {"trigger.offset_dx", 0.0},
      {"trigger.offset_dy", 0.0},
      {"trigger.interp", std::string("bilinear")},

      {"backdoor.checkpoint", std::string()},
      {"backdoor.epochs", std::int64_t{15}},
      {"backdoor.batch_size", std::int64_t{16}},
      {"backdoor.lr", 0.005},
      {"backdoor.momentum", 0.9},
      {"backdoor.weight_decay", 5e-4},

      {"mad.checkpoint", std::string()},
      {"mad.epochs", std::int64_t{10}},
      {"mad.batch_size", std::int64_t{16}},
      {"mad.lr", 0.005},
      {"mad.momentum", 0.9},
      {"mad.weight_decay", 5e-4},
      {"mad.epsilon", 16.0 / 255.0},
      {"mad.eta", 2.0 / 255.0},
      {"mad.steps", std::int64_t{10}},
      {"mad.beta3", 0.5},
      {"mad.beta5", 1.5},
      {"mad.beta7", 3.0},
      {"mad.use_lv", true},
      {"mad.use_ly", true},
      {"mad.baseline", std::string("poisoned")},

      {"eval.iou", 0.5},
      {"eval.conf", 0.25},
      {"eval.ap_conf", 0.001},
      {"eval.nms_iou", 0.45},
      {"eval.trigger_mode", std::string("variable")},
      {"eval.noise_region", std::string("trigger")},
      {"eval.noise_seed", std::int64_t{3}},
      {"eval.gaussian", List{0.1, 0.2, 0.3}},
      {"eval.motion_blur", List{3, 5, 7}},
      {"eval.motion_angle", 0.0},
      {"eval.rain", List{10, 20, 40}},
      {"eval.light", List{0.5, 1.5, 2.0}},
      {"eval.loss_change_noise", std::string("gaussian")},
      {"eval.loss_change_value", 0.2},
  };
  return r;
}

const char* type_name(const Value& v) {
  switch (v.index()) {
    case 0:
      return "bool";
    case 1:
      return "integer";
    case 2:
      return "number";
    case 3:
      return "string";
    default:
      return "number list";
  }
}

Value from_json(const std::string& key, const json& j, const Value& like) {
  auto bad = [&]() -> Value {
    throw ConfigError("config key '" + key + "' expects a " + type_name(like));
  };
  switch (like.index()) {
    case 0:
      return j.is_boolean() ? Value(j.get<bool>()) : bad();
    case 1:
      return j.is_number_integer() ? Value(j.get<std::int64_t>()) : bad();
    case 2:
      return j.is_number() ? Value(j.get<double>()) : bad();
    case 3:
      return j.is_string() ? Value(j.get<std::string>()) : bad();
    default: {
      if (!j.is_array()) return bad();
      List out;
      for (const auto& e : j) {
        if (!e.is_number()) return bad();
        out.push_back(e.get<double>());
      }
      return out;
    }
  }
}

json to_json_value(const Value& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

Value coerce(const std::string& key, const Value& v) {
  const auto it = registry().find(key);
  if (it == registry().end()) throw ConfigError("unknown config key '" + key + "'");
  return from_json(key, to_json_value(v), it->second);
}

}  // namespace

std::string value_to_string(const Value& v) { return to_json_value(v).dump(); }

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.values_ = registry();
  return c;
}

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, v] : registry()) k.push_back(name);
    return k;
  }();
  return keys;
}

bool RunConfig::is_known(const std::string& key) { return registry().count(key) > 0; }

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(source + ": config must be a JSON object");
  RunConfig c = defaults();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "sweep") {
      if (!it.value().is_object()) throw ConfigError(source + ": 'sweep' must be an object");
      std::vector<SweepAxis> axes;
      for (auto s = it.value().begin(); s != it.value().end(); ++s) {
        const auto reg = registry().find(s.key());
        if (reg == registry().end()) throw ConfigError(source + ": unknown sweep key '" + s.key() + "'");
        if (!s.value().is_array()) throw ConfigError(source + ": sweep '" + s.key() + "' must be an array");
        SweepAxis ax{s.key(), {}};
        for (const auto& e : s.value()) ax.values.push_back(from_json(s.key(), e, reg->second));
        axes.push_back(std::move(ax));
      }
      c.set_sweep(std::move(axes));
      continue;
    }
    const auto reg = registry().find(it.key());
    if (reg == registry().end()) throw ConfigError(source + ": unknown config key '" + it.key() + "'");
    c.values_[it.key()] = from_json(it.key(), it.value(), reg->second);
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

const Value& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

bool RunConfig::get_bool(const std::string& key) const { return std::get<bool>(get(key)); }
std::int64_t RunConfig::get_int(const std::string& key) const { return std::get<std::int64_t>(get(key)); }
double RunConfig::get_double(const std::string& key) const {
  const Value& v = get(key);
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}
const std::string& RunConfig::get_string(const std::string& key) const {
  return std::get<std::string>(get(key));
}
const std::vector<double>& RunConfig::get_list(const std::string& key) const {
  return std::get<List>(get(key));
}

void RunConfig::set(const std::string& key, const Value& v) { values_[key] = coerce(key, v); }

void RunConfig::set_from_string(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  const auto reg = registry().find(key);
  if (reg == registry().end()) throw ConfigError("unknown config key '" + key + "'");
  json j;
  switch (reg->second.index()) {
    case 3:
      j = text;
      break;
    case 4: {
      j = json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
          j.push_back(std::stod(item));
        } catch (const std::exception&) {
          throw ConfigError("config key '" + key + "': '" + item + "' is not a number");
        }
      }
      break;
    }
    default:
      try {
        j = json::parse(text);
      } catch (const json::parse_error&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
      }
  }
  values_[key] = from_json(key, j, reg->second);
}

void RunConfig::set_sweep(std::vector<SweepAxis> axes) {
  for (auto& ax : axes) {
    if (ax.values.empty()) throw ConfigError("sweep '" + ax.key + "' has no values");
    for (auto& v : ax.values) v = coerce(ax.key, v);
  }
  sweep_ = std::move(axes);
}

std::vector<RunConfig::Point> RunConfig::expand() const {
  std::vector<Point> pts;
  if (sweep_.empty()) return pts;
  RunConfig base = *this;
  base.sweep_.clear();
  pts.push_back({"", base});
  for (const auto& ax : sweep_) {
    std::vector<Point> next;
    for (const auto& p : pts) {
      for (const auto& v : ax.values) {
        Point q = p;
        q.config.values_[ax.key] = v;
        q.label += (q.label.empty() ? "" : ",") + ax.key + "=" + value_to_string(v);
        next.push_back(std::move(q));
      }
    }
    pts = std::move(next);
  }
  return pts;
}

std::string RunConfig::to_json() const {
  json j = json::object();
  for (const auto& [k, v] : values_) j[k] = to_json_value(v);
  if (!sweep_.empty()) {
    json s = json::object();
    for (const auto& ax : sweep_) {
      json arr = json::array();
      for (const auto& v : ax.values) arr.push_back(to_json_value(v));
      s[ax.key] = arr;
    }
    j["sweep"] = s;
  }
  return j.dump(2);
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + value_to_string(v) + ";";
  for (const auto& ax : sweep_) {
    out += "sweep." + ax.key + "=[";
    for (const auto& v : ax.values) out += value_to_string(v) + ",";
    out += "];";
  }
  return out;
}

std::string RunConfig::digest() const {
  Fnv1a f;
  f.update(canonical());
  return hex64(f.value());
}

}  // namespace rba::cfg

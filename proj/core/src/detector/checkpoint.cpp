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

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "rba/detector/detector.hpp"
#include "rba/errors.hpp"

namespace rba::det {
namespace {

using nlohmann::json;

constexpr int kCheckpointVersion = 1;

json config_to_json(const DetectorConfig& c) {
  return json{{"image_side", c.image_side}, {"num_classes", c.num_classes},
              {"channels", c.channels},     {"strides", c.strides},
              {"taps", c.taps},             {"anchor", {c.anchor_w, c.anchor_h}},
              {"leaky_slope", c.leaky_slope}};
}

DetectorConfig config_from_json(const json& j) {
  DetectorConfig c;
  c.image_side = j.at("image_side").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.channels = j.at("channels").get<std::vector<int>>();
  c.strides = j.at("strides").get<std::vector<int>>();
  c.taps = j.at("taps").get<std::vector<int>>();
  c.anchor_w = j.at("anchor").at(0).get<double>();
  c.anchor_h = j.at("anchor").at(1).get<double>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const DetectorParams& params,
                     const std::string& meta_json) {
  json j;
  j["format"] = "rba-detector-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config"] = config_to_json(params.config);
  j["config_digest"] = params.config.digest();
  j["meta"] = json::parse(meta_json);
  json arr = json::array();
  const auto names = params.parameter_names();
  const auto tensors = params.parameters();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    arr.push_back({{"name", names[i]},
                   {"shape", tensors[i].shape()},
                   {"data", std::vector<double>(tensors[i].data().begin(), tensors[i].data().end())}});
  }
  j["params"] = std::move(arr);

  const auto p = std::filesystem::path(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw ConfigError("cannot write checkpoint: " + path);
    os << j.dump();
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path, const DetectorConfig* expected) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open checkpoint: " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ParseError("checkpoint " + path + ": " + e.what());
  }
  LoadedCheckpoint out;
  try {
    if (j.at("format") != "rba-detector-checkpoint") throw ParseError("checkpoint " + path + ": bad format tag");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ParseError("checkpoint " + path + ": unsupported version");
    }
    DetectorConfig cfg = config_from_json(j.at("config"));
    const std::string stored = j.at("config_digest").get<std::string>();
    if (stored != cfg.digest()) throw ParseError("checkpoint " + path + ": config digest does not match config");
    if (expected != nullptr && expected->digest() != stored) {
      throw ConfigError("checkpoint " + path + " was written for config " + stored +
                        ", expected " + expected->digest());
    }
    out.params = DetectorParams::zeros(cfg);
    auto tensors = out.params.parameters();
    const auto names = out.params.parameter_names();
    const json& arr = j.at("params");
    if (arr.size() != tensors.size()) throw ParseError("checkpoint " + path + ": parameter count mismatch");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const json& e = arr.at(i);
      if (e.at("name") != names[i]) throw ParseError("checkpoint " + path + ": unexpected parameter " + e.at("name").dump());
      if (e.at("shape").get<grad::Shape>() != tensors[i].shape()) {
        throw ParseError("checkpoint " + path + ": shape mismatch for " + names[i]);
      }
      auto data = e.at("data").get<std::vector<double>>();
      auto dst = tensors[i].mutable_data();
      if (data.size() != dst.size()) throw ParseError("checkpoint " + path + ": size mismatch for " + names[i]);
      std::copy(data.begin(), data.end(), dst.begin());
    }
    out.meta_json = j.value("meta", json::object()).dump();
  } catch (const json::exception& e) {
    throw ParseError("checkpoint " + path + ": " + e.what());
  }
  return out;
}

}  // namespace rba::det

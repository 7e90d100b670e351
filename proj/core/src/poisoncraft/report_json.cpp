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

#include "json.hpp"
#include "rba/errors.hpp"
#include "rba/poisoncraft/poison.hpp"

namespace rba::poison {
namespace {

using nlohmann::json;

json box_json(const det::Box& b) { return json::array({b.xc, b.yc, b.w, b.h}); }

det::Box box_from(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

}  // namespace

std::string report_to_json(const PoisonReport& r) {
  json j;
  j["target_rate"] = r.target_rate;
  j["achieved_rate"] = r.achieved_rate;
  j["total_boxes"] = r.total_boxes;
  j["target_boxes"] = r.target_boxes;
  j["poisoned_boxes"] = r.poisoned_boxes;
  j["poisoned_images"] = r.poisoned_images;
  j["warnings"] = r.warnings;
  json imgs = json::array();
  for (const auto& im : r.images) {
    json objs = json::array();
    for (const auto& o : im.objects) {
      const PixelRect& p = o.trigger.pixels;
      objs.push_back({{"ann_id", o.ann_id},
                      {"class", o.original.cls},
                      {"box", box_json(o.original.box)},
                      {"trigger_box", box_json(o.trigger.region)},
                      {"trigger_pixels", json::array({p.x0, p.y0, p.w, p.h})},
                      {"shrunk", o.trigger.shrunk}});
    }
    imgs.push_back({{"image_id", im.image_id}, {"objects", objs}, {"warnings", im.warnings}});
  }
  j["images"] = imgs;
  return j.dump(2);
}

PoisonReport report_from_json(const std::string& text) {
  PoisonReport r;
  try {
    const json j = json::parse(text);
    r.target_rate = j.at("target_rate").get<double>();
    r.achieved_rate = j.at("achieved_rate").get<double>();
    r.total_boxes = j.at("total_boxes").get<std::size_t>();
    r.target_boxes = j.at("target_boxes").get<std::size_t>();
    r.poisoned_boxes = j.at("poisoned_boxes").get<std::size_t>();
    r.poisoned_images = j.at("poisoned_images").get<std::size_t>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& im : j.at("images")) {
      ImageProvenance p;
      p.image_id = im.at("image_id").get<std::int64_t>();
      p.warnings = im.at("warnings").get<std::vector<std::string>>();
      for (const auto& o : im.at("objects")) {
        PoisonedObject po;
        po.ann_id = o.at("ann_id").get<std::int64_t>();
        po.original = {o.at("class").get<int>(), box_from(o.at("box"))};
        po.trigger.region = box_from(o.at("trigger_box"));
        const auto& px = o.at("trigger_pixels");
        po.trigger.pixels = {px.at(0).get<int>(), px.at(1).get<int>(), px.at(2).get<int>(),
                             px.at(3).get<int>()};
        po.trigger.shrunk = o.at("shrunk").get<bool>();
        p.objects.push_back(po);
      }
      r.images.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("poison report: ") + e.what());
  }
  return r;
}

}  // namespace rba::poison

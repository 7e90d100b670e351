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


#include "rba/workbench/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rba/errors.hpp"
#include "rba/workbench/png_io.hpp"
#include "rba/workbench/synth.hpp"

namespace rba::io {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& source, const std::string& where, const std::string& what) {
  throw ParseError(source + ": " + where + ": " + what);
}

const json& field(const json& obj, const char* key, const std::string& source, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(source, where, std::string("missing field '") + key + "'");
  return *it;
}

std::int64_t get_int(const json& obj, const char* key, const std::string& source, const std::string& where) {
  const json& v = field(obj, key, source, where);
  if (!v.is_number_integer()) fail(source, where + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& source,
                       const std::string& where) {
  const json& v = field(obj, key, source, where);
  if (!v.is_string()) fail(source, where + "." + key, "expected a string");
  return v.get<std::string>();
}

Extras extras_of(const json& obj, std::initializer_list<const char*> known) {
  Extras e;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool is_known = false;
    for (const char* k : known) is_known |= it.key() == k;
    if (!is_known) e[it.key()] = it.value().dump();
  }
  return e;
}

void put_extras(json& obj, const Extras& e) {
  for (const auto& [k, v] : e) obj[k] = json::parse(v);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + tmp);
    out << text;
  }
  fs::rename(tmp, path);
}

}  // namespace

Manifest parse_manifest(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(source, "byte " + std::to_string(e.byte), e.what());
  }
  if (!j.is_object()) fail(source, "<root>", "expected an object");
  Manifest m;
  m.extra = extras_of(j, {"images", "annotations", "categories"});

  for (const char* key : {"images", "annotations", "categories"}) {
    if (!field(j, key, source, "<root>").is_array()) fail(source, key, "expected an array");
  }

  std::set<std::int64_t> image_ids;
  std::map<std::int64_t, std::pair<int, int>> dims;
  const json& imgs = j["images"];
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    const std::string where = "images[" + std::to_string(i) + "]";
    const json& o = imgs[i];
    if (!o.is_object()) fail(source, where, "expected an object");
    ManifestImage im;
    im.id = get_int(o, "id", source, where);
    im.file_name = get_string(o, "file_name", source, where);
    im.width = static_cast<int>(get_int(o, "width", source, where));
    im.height = static_cast<int>(get_int(o, "height", source, where));
    if (im.width < 1 || im.height < 1) fail(source, where, "width and height must be positive");
    if (!image_ids.insert(im.id).second) fail(source, where + ".id", "duplicate image id " + std::to_string(im.id));
    dims[im.id] = {im.width, im.height};
    im.extra = extras_of(o, {"id", "file_name", "width", "height"});
    m.images.push_back(std::move(im));
  }

  std::set<int> cat_ids;
  const json& cats = j["categories"];
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const std::string where = "categories[" + std::to_string(i) + "]";
    const json& o = cats[i];
    if (!o.is_object()) fail(source, where, "expected an object");
    ManifestCategory c;
    c.id = static_cast<int>(get_int(o, "id", source, where));
    c.name = get_string(o, "name", source, where);
    if (c.id < 0) fail(source, where + ".id", "category ids must be >= 0");
    if (!cat_ids.insert(c.id).second) fail(source, where + ".id", "duplicate category id " + std::to_string(c.id));
    c.extra = extras_of(o, {"id", "name"});
    m.categories.push_back(std::move(c));
  }

  std::set<std::int64_t> ann_ids;
  const json& anns = j["annotations"];
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string where = "annotations[" + std::to_string(i) + "]";
    const json& o = anns[i];
    if (!o.is_object()) fail(source, where, "expected an object");
    ManifestAnnotation a;
    a.id = get_int(o, "id", source, where);
    a.image_id = get_int(o, "image_id", source, where);
    a.category_id = static_cast<int>(get_int(o, "category_id", source, where));
    if (!ann_ids.insert(a.id).second) fail(source, where + ".id", "duplicate annotation id " + std::to_string(a.id));
    if (!image_ids.count(a.image_id)) {
      fail(source, where + ".image_id", "image id " + std::to_string(a.image_id) + " does not exist");
    }
    if (!cat_ids.count(a.category_id)) {
      fail(source, where + ".category_id",
           "category id " + std::to_string(a.category_id) + " does not exist");
    }
    const json& bb = field(o, "bbox", source, where);
    if (!bb.is_array() || bb.size() != 4) fail(source, where + ".bbox", "expected an array of 4 numbers");
    for (int k = 0; k < 4; ++k) {
      if (!bb[k].is_number()) fail(source, where + ".bbox", "expected an array of 4 numbers");
      a.bbox[k] = bb[k].get<double>();
    }
    const auto [w, h] = dims[a.image_id];
    constexpr double kSlack = 1e-9;
    if (a.bbox[2] <= 0 || a.bbox[3] <= 0 || a.bbox[0] < -kSlack || a.bbox[1] < -kSlack ||
        a.bbox[0] + a.bbox[2] > w + kSlack || a.bbox[1] + a.bbox[3] > h + kSlack) {
      fail(source, where + ".bbox", "box lies outside image " + std::to_string(a.image_id));
    }
    a.extra = extras_of(o, {"id", "image_id", "category_id", "bbox"});
    m.annotations.push_back(std::move(a));
  }
  return m;
}

std::string dump_manifest(const Manifest& m) {
  json j = json::object();
  json imgs = json::array(), anns = json::array(), cats = json::array();
  for (const auto& im : m.images) {
    json o = {{"id", im.id}, {"file_name", im.file_name}, {"width", im.width}, {"height", im.height}};
    put_extras(o, im.extra);
    imgs.push_back(std::move(o));
  }
  for (const auto& a : m.annotations) {
    json o = {{"id", a.id},
              {"image_id", a.image_id},
              {"category_id", a.category_id},
              {"bbox", json::array({a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]})}};
    put_extras(o, a.extra);
    anns.push_back(std::move(o));
  }
  for (const auto& c : m.categories) {
    json o = {{"id", c.id}, {"name", c.name}};
    put_extras(o, c.extra);
    cats.push_back(std::move(o));
  }
  j["images"] = std::move(imgs);
  j["annotations"] = std::move(anns);
  j["categories"] = std::move(cats);
  put_extras(j, m.extra);
  return j.dump(1);
}

Manifest load_manifest(const std::string& path) { return parse_manifest(read_file(path), path); }

void save_manifest(const Manifest& m, const std::string& path) { write_file_atomic(path, dump_manifest(m)); }

det::Box from_pixel_bbox(const std::array<double, 4>& b, int width, int height) {
  return {(b[0] + b[2] / 2.0) / width, (b[1] + b[3] / 2.0) / height, b[2] / width, b[3] / height};
}

std::array<double, 4> to_pixel_bbox(const det::Box& box, int width, int height) {
  const double w = box.w * width, h = box.h * height;
  return {box.xc * width - w / 2.0, box.yc * height - h / 2.0, w, h};
}

Manifest to_manifest(const Dataset& dataset) {
  Manifest m;
  for (int c = 0; c < synth::kNumClasses; ++c) m.categories.push_back({c, synth::kClassNames[c], {}});
  for (const Sample& s : dataset) {
    m.images.push_back({s.image_id, s.file_name, s.image.width, s.image.height, {}});
    for (std::size_t i = 0; i < s.anns.size(); ++i) {
      ManifestAnnotation a;
      a.id = i < s.ann_ids.size() ? s.ann_ids[i] : static_cast<std::int64_t>(i);
      a.image_id = s.image_id;
      a.category_id = s.anns[i].cls;
      a.bbox = to_pixel_bbox(s.anns[i].box, s.image.width, s.image.height);
      m.annotations.push_back(a);
    }
  }
  return m;
}

Dataset from_manifest(const Manifest& m, const std::string& image_root, bool load_images) {
  Dataset d;
  std::map<std::int64_t, std::size_t> index;
  for (const auto& im : m.images) {
    Sample s;
    s.image_id = im.id;
    s.file_name = im.file_name;
    if (load_images) {
      s.image = read_png((fs::path(image_root) / im.file_name).string());
      if (s.image.width != im.width || s.image.height != im.height) {
        throw ParseError(im.file_name + ": image size does not match the manifest");
      }
    } else {
      s.image = Image(im.height, im.width);
    }
    index[im.id] = d.size();
    d.push_back(std::move(s));
  }
  for (const auto& a : m.annotations) {
    Sample& s = d[index.at(a.image_id)];
    s.anns.push_back({a.category_id, from_pixel_bbox(a.bbox, s.image.width, s.image.height)});
    s.ann_ids.push_back(a.id);
  }
  return d;
}

void save_dataset(const Dataset& dataset, const std::string& dir, const std::string& manifest_name) {
  fs::create_directories(dir);
  for (const Sample& s : dataset) {
    if (s.file_name.empty()) throw ConfigError("save_dataset: sample " + std::to_string(s.image_id) + " has no file name");
    if (s.file_name.rfind("..", 0) == 0) continue;
    const fs::path p = fs::path(dir) / s.file_name;
    fs::create_directories(p.parent_path());
    write_png(p.string(), s.image);
  }
  save_manifest(to_manifest(dataset), (fs::path(dir) / manifest_name).string());
}

Dataset load_dataset(const std::string& manifest_path) {
  return from_manifest(load_manifest(manifest_path), fs::path(manifest_path).parent_path().string());
}

}  // namespace rba::io

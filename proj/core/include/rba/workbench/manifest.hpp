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

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rba/dataset.hpp"

namespace rba::io {

// Unknown JSON members, key -> serialized value.
using Extras = std::map<std::string, std::string>;

struct ManifestImage {
  std::int64_t id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  Extras extra;
  bool operator==(const ManifestImage&) const = default;
};

struct ManifestAnnotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  int category_id = 0;
  std::array<double, 4> bbox{};  // x_min, y_min, w, h in pixels
  Extras extra;
  bool operator==(const ManifestAnnotation&) const = default;
};

struct ManifestCategory {
  int id = 0;
  std::string name;
  Extras extra;
  bool operator==(const ManifestCategory&) const = default;
};

struct Manifest {
  std::vector<ManifestImage> images;
  std::vector<ManifestAnnotation> annotations;
  std::vector<ManifestCategory> categories;
  Extras extra;
  bool operator==(const Manifest&) const = default;
};

Manifest parse_manifest(const std::string& text, const std::string& source = "manifest");
std::string dump_manifest(const Manifest& m);
Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& m, const std::string& path);

// Pixel [x_min, y_min, w, h] <-> normalized center form.
det::Box from_pixel_bbox(const std::array<double, 4>& bbox, int width, int height);
std::array<double, 4> to_pixel_bbox(const det::Box& box, int width, int height);

Manifest to_manifest(const Dataset& dataset);
// Images are read from `image_root` / file_name when load_images is set.
Dataset from_manifest(const Manifest& m, const std::string& image_root, bool load_images = true);

// Writes every image whose file_name lies under `dir` as PNG, then the manifest.
void save_dataset(const Dataset& dataset, const std::string& dir, const std::string& manifest_name);
Dataset load_dataset(const std::string& manifest_path);

}  // namespace rba::io

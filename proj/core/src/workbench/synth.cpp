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


#include "rba/workbench/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstdio>
#include <random>

#include "rba/errors.hpp"
#include "rba/hash.hpp"

namespace rba::synth {
namespace {

constexpr std::array<std::array<double, 3>, 8> kPalette{{
    {0.85, 0.15, 0.15},
    {0.15, 0.70, 0.20},
    {0.20, 0.30, 0.85},
    {0.90, 0.55, 0.10},
    {0.60, 0.20, 0.70},
    {0.95, 0.95, 0.95},
    {0.08, 0.08, 0.08},
    {0.90, 0.85, 0.20},
}};

struct PixelBox {
  int x0, y0, w, h;
};

double box_iou(const PixelBox& a, const PixelBox& b) {
  const int ix = std::max(0, std::min(a.x0 + a.w, b.x0 + b.w) - std::max(a.x0, b.x0));
  const int iy = std::max(0, std::min(a.y0 + a.h, b.y0 + b.h) - std::max(a.y0, b.y0));
  const double inter = static_cast<double>(ix) * iy;
  return inter / (static_cast<double>(a.w) * a.h + static_cast<double>(b.w) * b.h - inter);
}

// u, v in [0,1] box coordinates.
bool inside(int cls, double u, double v) {
  switch (cls) {
    case kCircle:
      return (u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5) <= 0.25;
    case kSquare:
      return true;
    case kTriangle:
      return v >= 2.0 * std::abs(u - 0.5);
    case kCross:
      return std::abs(u - 0.5) <= 1.0 / 6.0 || std::abs(v - 0.5) <= 1.0 / 6.0;
  }
  return false;
}

Image background(int side, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double gray = 0.25 + 0.5 * u01(rng);
  std::array<double, 3> base;
  for (double& b : base) b = std::clamp(gray + 0.24 * (u01(rng) - 0.5), 0.0, 1.0);
  const double ang = 2.0 * std::numbers::pi * u01(rng);
  const double grad_amp = 0.1 * u01(rng);
  const double freq = 1.0 + 3.0 * u01(rng);
  const double stripe_ang = std::numbers::pi * u01(rng);
  const double phase = 2.0 * std::numbers::pi * u01(rng);
  Image img(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double nx = (x + 0.5) / side - 0.5, ny = (y + 0.5) / side - 0.5;
      const double g = grad_amp * (nx * std::cos(ang) + ny * std::sin(ang));
      const double s = 0.05 * std::sin(2.0 * std::numbers::pi * freq *
                                            (nx * std::cos(stripe_ang) + ny * std::sin(stripe_ang)) +
                                        phase);
      const double grain = 0.06 * (u01(rng) - 0.5);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = std::clamp(base[c] + g + s + grain, 0.0, 1.0);
    }
  }
  return img;
}

void draw(Image& img, int cls, const PixelBox& b, const std::array<double, 3>& color, int ss) {
  const double inv = 1.0 / (ss * ss);
  for (int y = b.y0; y < b.y0 + b.h; ++y) {
    for (int x = b.x0; x < b.x0 + b.w; ++x) {
      int hits = 0;
      for (int sy = 0; sy < ss; ++sy) {
        for (int sx = 0; sx < ss; ++sx) {
          const double u = (x - b.x0 + (sx + 0.5) / ss) / b.w;
          const double v = (y - b.y0 + (sy + 0.5) / ss) / b.h;
          hits += inside(cls, u, v);
        }
      }
      if (hits == 0) continue;
      const double cov = hits * inv;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = (1.0 - cov) * img.at(y, x, c) + cov * color[c];
    }
  }
}

}  // namespace

void SceneSpec::validate() const {
  if (image_side < 8) throw ConfigError("scene image side must be >= 8");
  if (min_objects < 1 || max_objects < min_objects) {
    throw ConfigError("scene object count range must satisfy 1 <= min <= max");
  }
  if (!(min_size > 0 && min_size <= max_size && max_size <= 1.0)) {
    throw ConfigError("scene size range must satisfy 0 < min <= max <= 1");
  }
  if (static_cast<int>(std::ceil(min_size * image_side)) > static_cast<int>(std::floor(max_size * image_side))) {
    throw ConfigError("scene size range contains no integer pixel size");
  }
  double total = 0;
  for (double w : class_weights) {
    if (!(w >= 0)) throw ConfigError("class weights must be >= 0");
    total += w;
  }
  if (!(total > 0)) throw ConfigError("class weights must not all be zero");
  if (!(max_pair_iou > 0 && max_pair_iou <= 1)) throw ConfigError("max pair IoU must lie in (0,1]");
  if (max_attempts < 1) throw ConfigError("max attempts must be >= 1");
  if (supersample < 1) throw ConfigError("supersample must be >= 1");
}

Sample render_scene(const SceneSpec& spec, std::uint64_t seed, std::int64_t image_id,
                    std::int64_t first_ann_id) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const int side = spec.image_side;
  const int smin = static_cast<int>(std::ceil(spec.min_size * side - 1e-9));
  const int smax = static_cast<int>(std::floor(spec.max_size * side + 1e-9));
  std::uniform_int_distribution<int> count_d(spec.min_objects, spec.max_objects);
  std::uniform_int_distribution<int> size_d(smin, smax);
  std::uniform_real_distribution<double> aspect_d(0.75, 4.0 / 3.0);
  std::discrete_distribution<int> class_d(spec.class_weights.begin(), spec.class_weights.end());

  const int n = count_d(rng);
  std::vector<int> classes;
  std::vector<PixelBox> boxes;
  bool placed = false;
  for (int attempt = 0; attempt < spec.max_attempts && !placed; ++attempt) {
    classes.clear();
    boxes.clear();
    placed = true;
    for (int i = 0; i < n; ++i) {
      const int cls = class_d(rng);
      const int w = size_d(rng);
      int h = w;
      if (cls != kCircle) h = std::clamp(static_cast<int>(std::lround(w * aspect_d(rng))), smin, smax);
      std::uniform_int_distribution<int> xd(0, side - w), yd(0, side - h);
      const PixelBox b{xd(rng), yd(rng), w, h};
      for (const auto& o : boxes) {
        if (box_iou(o, b) >= spec.max_pair_iou) placed = false;
      }
      if (!placed) break;
      classes.push_back(cls);
      boxes.push_back(b);
    }
  }
  if (!placed) {
    throw GenerationError("could not place " + std::to_string(n) + " objects with pairwise IoU < " +
                          std::to_string(spec.max_pair_iou) + " after " +
                          std::to_string(spec.max_attempts) + " attempts (image " +
                          std::to_string(image_id) + ")");
  }

  Sample s;
  s.image_id = image_id;
  s.image = background(side, rng);
  std::uniform_int_distribution<int> pal_d(0, static_cast<int>(kPalette.size()) - 1);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const PixelBox& b = boxes[i];
    const int cy = b.y0 + b.h / 2, cx = b.x0 + b.w / 2;
    std::array<double, 3> color = kPalette[pal_d(rng)];
    for (int tries = 0; tries < 16; ++tries) {
      double d2 = 0;
      for (int c = 0; c < 3; ++c) d2 += std::pow(color[c] - s.image.at(cy, cx, c), 2);
      if (d2 >= 0.16) break;
      color = kPalette[pal_d(rng)];
    }
    draw(s.image, classes[i], b, color, spec.supersample);
    s.anns.push_back({classes[i], det::Box{(b.x0 + b.w / 2.0) / side, (b.y0 + b.h / 2.0) / side,
                                           static_cast<double>(b.w) / side,
                                           static_cast<double>(b.h) / side}});
    s.ann_ids.push_back(first_ann_id + static_cast<std::int64_t>(i));
  }
  return s;
}

Dataset generate(const SceneSpec& spec, int count, std::uint64_t seed, std::int64_t first_image_id) {
  if (count < 0) throw ConfigError("image count must be >= 0");
  Dataset d;
  d.reserve(static_cast<std::size_t>(count));
  std::int64_t ann_id = first_image_id * 16;
  for (int i = 0; i < count; ++i) {
    const std::int64_t id = first_image_id + i;
    Sample s = render_scene(spec, derive_seed(seed, "scene" + std::to_string(i)), id, ann_id);
    ann_id += static_cast<std::int64_t>(s.anns.size());
    char name[32];
    std::snprintf(name, sizeof name, "images/%06lld.png", static_cast<long long>(id));
    s.file_name = name;
    d.push_back(std::move(s));
  }
  return d;
}

SyntheticSet generate_synthetic(const SceneSpec& spec, int n_train, int n_val, std::uint64_t seed) {
  if (n_train < 1 || n_val < 1) throw ConfigError("n_train and n_val must be >= 1");
  SyntheticSet out;
  out.train = generate(spec, n_train, derive_seed(seed, "train"), 0);
  out.val = generate(spec, n_val, derive_seed(seed, "val"), n_train);
  return out;
}

}  // namespace rba::synth

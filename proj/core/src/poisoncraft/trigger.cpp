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

#include <algorithm>
#include <array>
#include <cmath>

#include "rba/errors.hpp"
#include "rba/gradcore/ops.hpp"
#include "rba/poisoncraft/poison.hpp"

namespace rba::poison {
namespace {

// Resized trigger as an HWC image of exactly (h, w).
Image resize_trigger(const Image& bitmap, int h, int w, bool bilinear) {
  grad::Tensor src = to_chw(bitmap);
  grad::Tensor dst = bilinear ? grad::resize_bilinear(src, h, w) : grad::resize_nearest(src, h, w);
  return from_chw(dst);
}

TriggerPlacement to_placement(PixelRect r, int img_h, int img_w, bool shrunk) {
  TriggerPlacement p;
  p.pixels = r;
  p.region = det::Box{(r.x0 + r.w / 2.0) / img_w, (r.y0 + r.h / 2.0) / img_h,
                      static_cast<double>(r.w) / img_w, static_cast<double>(r.h) / img_h};
  p.shrunk = shrunk;
  return p;
}

// Clip [x0, x0+len) to [lo, hi).
void clip_span(int& x0, int& len, int lo, int hi) {
  int a = std::max(x0, lo);
  int b = std::min(x0 + len, hi);
  x0 = a;
  len = std::max(0, b - a);
}

}  // namespace

void TriggerSpec::validate(int image_h, int image_w) const {
  if (bitmap.height < 1 || bitmap.width < 1) throw ConfigError("trigger bitmap is empty");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("trigger lambda must lie in [0,1]");
  if (mode == TriggerMode::kVariable) {
    if (!(rho_w > 0.0 && rho_w <= 1.0 && rho_h > 0.0 && rho_h <= 1.0)) {
      throw ConfigError("trigger scale ratios must lie in (0,1]");
    }
  } else {
    if (fixed_w < 1 || fixed_h < 1) throw ConfigError("fixed trigger size must be positive");
    if (fixed_w > image_w || fixed_h > image_h) {
      throw ConfigError("fixed trigger larger than the image");
    }
  }
}

Image default_trigger() {
  // 4x4 grid of 4x4-pixel cells: yellow/blue checker on top, magenta/cyan below.
  static constexpr std::array<std::array<double, 3>, 4> kColors{{
      {1.0, 1.0, 0.0},
      {0.0, 0.0, 1.0},
      {1.0, 0.0, 1.0},
      {0.0, 1.0, 1.0},
  }};
  Image img(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const int cy = y / 4, cx = x / 4;
      const int pick = (cy < 2 ? 0 : 2) + ((cx + cy) % 2);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = kColors[pick][c];
    }
  }
  return img;
}

ApplyResult apply_trigger_variable(const Image& image, const det::Annotation& ann,
                                   const TriggerSpec& spec) {
  if (spec.mode != TriggerMode::kVariable) throw ConfigError("apply_trigger_variable: spec is fixed-size");
  spec.validate(image.height, image.width);
  const int H = image.height, W = image.width;
  const det::Box& b = ann.box;

  int wp = static_cast<int>(std::lround(spec.rho_w * b.w * W));
  int hp = static_cast<int>(std::lround(spec.rho_h * b.h * H));
  double cx = b.xc * W, cy = b.yc * H;
  if (spec.placement == Placement::kOffset) {
    cx += spec.offset_dx * b.w * W;
    cy += spec.offset_dy * b.h * H;
  }
  int x0 = static_cast<int>(std::lround(cx - wp / 2.0));
  int y0 = static_cast<int>(std::lround(cy - hp / 2.0));
  const int want_w = wp, want_h = hp;

  const int ox0 = std::max(0, static_cast<int>(std::lround(b.x1() * W)));
  const int ox1 = std::min(W, static_cast<int>(std::lround(b.x2() * W)));
  const int oy0 = std::max(0, static_cast<int>(std::lround(b.y1() * H)));
  const int oy1 = std::min(H, static_cast<int>(std::lround(b.y2() * H)));
  clip_span(x0, wp, ox0, ox1);
  clip_span(y0, hp, oy0, oy1);

  ApplyResult out;
  out.image = image;
  if (wp < 1 || hp < 1) {
    out.warning = "object too small for a trigger; annotation left unpoisoned";
    return out;
  }
  const bool shrunk = wp != want_w || hp != want_h;
  const Image t = resize_trigger(spec.bitmap, hp, wp, spec.bilinear);
  const double lam = spec.lambda;
  for (int y = 0; y < hp; ++y) {
    for (int x = 0; x < wp; ++x) {
      for (int c = 0; c < 3; ++c) {
        double& px = out.image.at(y0 + y, x0 + x, c);
        px = (1.0 - lam) * px + lam * t.at(y, x, c);
      }
    }
  }
  out.placement = to_placement({x0, y0, wp, hp}, H, W, shrunk);
  if (shrunk) out.warning = "trigger region shrunk to fit the object box";
  return out;
}

ApplyResult apply_trigger_fixed(const Image& image, const det::Annotation& ann,
                                const TriggerSpec& spec) {
  if (spec.mode != TriggerMode::kFixed) throw ConfigError("apply_trigger_fixed: spec is variable-size");
  spec.validate(image.height, image.width);
  const int H = image.height, W = image.width;
  int wp = spec.fixed_w, hp = spec.fixed_h;
  int x0 = static_cast<int>(std::lround(ann.box.xc * W - wp / 2.0));
  int y0 = static_cast<int>(std::lround(ann.box.yc * H - hp / 2.0));
  clip_span(x0, wp, 0, W);
  clip_span(y0, hp, 0, H);

  ApplyResult out;
  out.image = image;
  if (wp < 1 || hp < 1) {
    out.warning = "trigger falls outside the image; annotation left unpoisoned";
    return out;
  }
  const bool shrunk = wp != spec.fixed_w || hp != spec.fixed_h;
  // Resize at the full fixed size, then crop to the visible part.
  const Image t = resize_trigger(spec.bitmap, spec.fixed_h, spec.fixed_w, spec.bilinear);
  const int tx0 = x0 - static_cast<int>(std::lround(ann.box.xc * W - spec.fixed_w / 2.0));
  const int ty0 = y0 - static_cast<int>(std::lround(ann.box.yc * H - spec.fixed_h / 2.0));
  const double lam = spec.lambda;
  for (int y = 0; y < hp; ++y) {
    for (int x = 0; x < wp; ++x) {
      for (int c = 0; c < 3; ++c) {
        double& px = out.image.at(y0 + y, x0 + x, c);
        px = px - lam * (px - t.at(ty0 + y, tx0 + x, c));
      }
    }
  }
  out.placement = to_placement({x0, y0, wp, hp}, H, W, shrunk);
  if (shrunk) out.warning = "fixed trigger clipped at the image border";
  return out;
}

ApplyResult apply_trigger(const Image& image, const det::Annotation& ann, const TriggerSpec& spec) {
  return spec.mode == TriggerMode::kVariable ? apply_trigger_variable(image, ann, spec)
                                             : apply_trigger_fixed(image, ann, spec);
}

}  // namespace rba::poison

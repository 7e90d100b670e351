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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rba/image.hpp"
#include "rba/poisoncraft/poison.hpp"

namespace rba::noise {

// clamp(image + N(0, variance)) per pixel-channel.
Image gaussian_noise(const Image& image, double variance, std::uint64_t seed);

// Normalized line kernel of `degree` taps at `angle_deg` (0 = horizontal),
// reflect-101 borders. degree 1 is the identity.
Image motion_blur(const Image& image, int degree, double angle_deg = 0.0);
// Kernel taps (dx, dy, weight) used by motion_blur.
struct BlurTap {
  int dx, dy;
  double weight;
};
std::vector<BlurTap> motion_kernel(int degree, double angle_deg);

// Streak geometry for rain_overlay.
struct RainStreak {
  double x0, y0;  // pixel start
  int length;     // 4..8 px
  double angle;   // radians from vertical, within +-10 degrees
};
inline constexpr double kRainAlpha = 0.4;
std::vector<RainStreak> rain_streaks(int height, int width, int drops, std::uint64_t seed);
// Pixels (x, y) covered by a streak: round(x0 + t sin a), round(y0 + t cos a),
// t = 0..length-1, off-image points dropped, duplicates removed.
std::vector<std::pair<int, int>> rasterize(const RainStreak& s, int height, int width);
// Each streak is composited once toward white with alpha kRainAlpha.
Image rain_overlay(const Image& image, int drops, std::uint64_t seed);

// Scales HSV saturation by `factor` (> 0), clamped to [0,1].
Image adjust_light(const Image& image, double factor);

enum class Kind { kGaussian, kMotionBlur, kRain, kLight };
enum class Region { kWholeImage, kTriggerOnly };

struct NoiseSpec {
  Kind kind = Kind::kGaussian;
  double value = 0.0;  // variance, degree, drop count or saturation factor
  double angle = 0.0;  // motion blur only
  std::uint64_t seed = 0;
  Region region = Region::kWholeImage;

  void validate() const;
  bool neutral() const;
  std::string label() const;
};

std::string kind_name(Kind k);
Kind parse_kind(const std::string& s);
std::string region_name(Region r);
Region parse_region(const std::string& s);

// Applies `spec`; with kTriggerOnly only pixels inside `regions` change.
Image apply(const Image& image, const NoiseSpec& spec, std::span<const poison::PixelRect> regions = {});

}  // namespace rba::noise

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

#include "rba/physnoise/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "rba/errors.hpp"

namespace rba::noise {
namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

}  // namespace

Image gaussian_noise(const Image& image, double variance, std::uint64_t seed) {
  if (variance < 0) throw ConfigError("gaussian noise variance must be >= 0");
  if (variance == 0) return image;
  Image out = image;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, std::sqrt(variance));
  for (double& v : out.px) v = std::clamp(v + dist(rng), 0.0, 1.0);
  return out;
}

std::vector<BlurTap> motion_kernel(int degree, double angle_deg) {
  if (degree < 1) throw ConfigError("motion blur degree must be >= 1");
  const double a = angle_deg * std::numbers::pi / 180.0;
  std::vector<BlurTap> taps;
  for (int i = 0; i < degree; ++i) {
    const double t = i - (degree - 1) / 2.0;
    const int dx = static_cast<int>(std::floor(t * std::cos(a) + 0.5));
    const int dy = static_cast<int>(std::floor(-t * std::sin(a) + 0.5));
    auto it = std::find_if(taps.begin(), taps.end(),
                           [&](const BlurTap& b) { return b.dx == dx && b.dy == dy; });
    if (it != taps.end()) {
      it->weight += 1.0 / degree;
    } else {
      taps.push_back({dx, dy, 1.0 / degree});
    }
  }
  return taps;
}

Image motion_blur(const Image& image, int degree, double angle_deg) {
  if (degree < 1) throw ConfigError("motion blur degree must be >= 1");
  if (degree > std::min(image.height, image.width)) {
    throw ConfigError("motion blur degree exceeds the image side");
  }
  if (degree == 1) return image;
  const auto taps = motion_kernel(degree, angle_deg);
  Image out(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (const auto& t : taps) {
          acc += t.weight * image.at(reflect101(y + t.dy, image.height),
                                     reflect101(x + t.dx, image.width), c);
        }
        out.at(y, x, c) = std::clamp(acc, 0.0, 1.0);
      }
    }
  }
  return out;
}

std::vector<RainStreak> rain_streaks(int height, int width, int drops, std::uint64_t seed) {
  if (drops < 0) throw ConfigError("rain drop count must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, width), uy(0.0, height);
  std::uniform_int_distribution<int> ulen(4, 8);
  std::uniform_real_distribution<double> uang(-10.0, 10.0);
  std::vector<RainStreak> out;
  out.reserve(static_cast<std::size_t>(drops));
  for (int i = 0; i < drops; ++i) {
    RainStreak s;
    s.x0 = ux(rng);
    s.y0 = uy(rng);
    s.length = ulen(rng);
    s.angle = uang(rng) * std::numbers::pi / 180.0;
    out.push_back(s);
  }
  return out;
}

std::vector<std::pair<int, int>> rasterize(const RainStreak& s, int height, int width) {
  std::vector<std::pair<int, int>> pts;
  for (int t = 0; t < s.length; ++t) {
    const int x = static_cast<int>(std::lround(s.x0 + t * std::sin(s.angle)));
    const int y = static_cast<int>(std::lround(s.y0 + t * std::cos(s.angle)));
    if (x < 0 || x >= width || y < 0 || y >= height) continue;
    if (std::find(pts.begin(), pts.end(), std::make_pair(x, y)) == pts.end()) pts.emplace_back(x, y);
  }
  return pts;
}

Image rain_overlay(const Image& image, int drops, std::uint64_t seed) {
  if (drops < 0) throw ConfigError("rain drop count must be >= 0");
  Image out = image;
  for (const auto& s : rain_streaks(image.height, image.width, drops, seed)) {
    for (auto [x, y] : rasterize(s, image.height, image.width)) {
      for (int c = 0; c < 3; ++c) {
        double& v = out.at(y, x, c);
        v = (1.0 - kRainAlpha) * v + kRainAlpha;
      }
    }
  }
  return out;
}

Image adjust_light(const Image& image, double factor) {
  if (!(factor >= 0)) throw ConfigError("saturation factor must be >= 0");
  if (factor == 1.0) return image;
  Image out = image;
  const std::size_t n = static_cast<std::size_t>(image.height) * image.width;
  for (std::size_t i = 0; i < n; ++i) {
    double* p = out.px.data() + 3 * i;
    const double r = p[0], g = p[1], b = p[2];
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    double h = 0.0;  // sextants, [0, 6)
    if (delta > 0) {
      if (mx == r) {
        h = std::fmod((g - b) / delta, 6.0);
        if (h < 0) h += 6.0;
      } else if (mx == g) {
        h = (b - r) / delta + 2.0;
      } else {
        h = (r - g) / delta + 4.0;
      }
    }
    const double v = mx;
    const double s = mx > 0 ? std::clamp(delta / mx * factor, 0.0, 1.0) : 0.0;
    for (int c = 0; c < 3; ++c) {
      const double n_off = c == 0 ? 5.0 : (c == 1 ? 3.0 : 1.0);
      const double k = std::fmod(n_off + h, 6.0);
      p[c] = std::clamp(v - v * s * std::max(0.0, std::min({k, 4.0 - k, 1.0})), 0.0, 1.0);
    }
  }
  return out;
}

void NoiseSpec::validate() const {
  switch (kind) {
    case Kind::kGaussian:
      if (value < 0) throw ConfigError("gaussian variance must be >= 0");
      break;
    case Kind::kMotionBlur:
      if (value < 1 || value != std::floor(value)) {
        throw ConfigError("motion blur degree must be an integer >= 1");
      }
      break;
    case Kind::kRain:
      if (value < 0 || value != std::floor(value)) {
        throw ConfigError("rain drop count must be an integer >= 0");
      }
      break;
    case Kind::kLight:
      if (!(value > 0)) throw ConfigError("saturation factor must be > 0");
      break;
  }
}

bool NoiseSpec::neutral() const {
  switch (kind) {
    case Kind::kGaussian:
      return value == 0;
    case Kind::kMotionBlur:
      return value == 1;
    case Kind::kRain:
      return value == 0;
    case Kind::kLight:
      return value == 1;
  }
  return false;
}

std::string NoiseSpec::label() const {
  std::ostringstream os;
  os << kind_name(kind) << '=' << value;
  if (region == Region::kTriggerOnly) os << "@trigger";
  return os.str();
}

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::kGaussian:
      return "gaussian";
    case Kind::kMotionBlur:
      return "motion_blur";
    case Kind::kRain:
      return "rain";
    case Kind::kLight:
      return "light";
  }
  return "?";
}

Kind parse_kind(const std::string& s) {
  if (s == "gaussian") return Kind::kGaussian;
  if (s == "motion_blur" || s == "blur") return Kind::kMotionBlur;
  if (s == "rain") return Kind::kRain;
  if (s == "light") return Kind::kLight;
  throw ConfigError("unknown noise kind '" + s + "'");
}

std::string region_name(Region r) { return r == Region::kTriggerOnly ? "trigger" : "whole"; }

Region parse_region(const std::string& s) {
  if (s == "trigger") return Region::kTriggerOnly;
  if (s == "whole") return Region::kWholeImage;
  throw ConfigError("unknown noise region '" + s + "'");
}

Image apply(const Image& image, const NoiseSpec& spec, std::span<const poison::PixelRect> regions) {
  spec.validate();
  Image noisy;
  switch (spec.kind) {
    case Kind::kGaussian:
      noisy = gaussian_noise(image, spec.value, spec.seed);
      break;
    case Kind::kMotionBlur:
      noisy = motion_blur(image, static_cast<int>(spec.value), spec.angle);
      break;
    case Kind::kRain:
      noisy = rain_overlay(image, static_cast<int>(spec.value), spec.seed);
      break;
    case Kind::kLight:
      noisy = adjust_light(image, spec.value);
      break;
  }
  if (spec.region == Region::kWholeImage) return noisy;
  Image out = image;
  for (const auto& r : regions) {
    for (int y = r.y0; y < r.y0 + r.h; ++y) {
      for (int x = r.x0; x < r.x0 + r.w; ++x) {
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = noisy.at(y, x, c);
      }
    }
  }
  return out;
}

}  // namespace rba::noise

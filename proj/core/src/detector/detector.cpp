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

#include "rba/detector/detector.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rba/errors.hpp"
#include "rba/gradcore/ops.hpp"
#include "rba/hash.hpp"

namespace rba::det {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

int DetectorConfig::grid_side() const {
  int prod = 1;
  for (int s : strides) prod *= s;
  return prod > 0 ? image_side / prod : 0;
}

void DetectorConfig::validate() const {
  if (image_side < 1) throw ConfigError("image_side must be positive");
  if (num_classes < 1) throw ConfigError("num_classes must be positive");
  if (channels.empty() || channels.size() != strides.size()) {
    throw ConfigError("channels and strides must be non-empty and of equal length");
  }
  int prod = 1;
  for (int s : strides) {
    if (s < 1 || (s & (s - 1)) != 0) throw ConfigError("strides must be powers of two");
    prod *= s;
  }
  if (image_side % prod != 0) {
    throw ConfigError("image_side must be divisible by the product of backbone strides");
  }
  for (int c : channels) {
    if (c < 1) throw ConfigError("channel counts must be positive");
  }
  int prev = 0;
  for (int t : taps) {
    if (t < 1 || t > blocks() || t <= prev) {
      throw ConfigError("tap indices must be valid, strictly increasing block indices");
    }
    prev = t;
  }
  if (!(anchor_w > 0 && anchor_h > 0)) throw ConfigError("anchor size must be positive");
}

std::string DetectorConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "image_side=" << image_side << ";num_classes=" << num_classes << ";channels=";
  for (int c : channels) os << c << ',';
  os << ";strides=";
  for (int s : strides) os << s << ',';
  os << ";taps=";
  for (int t : taps) os << t << ',';
  os << ";anchor=" << anchor_w << ',' << anchor_h << ";slope=" << leaky_slope;
  return os.str();
}

std::string DetectorConfig::digest() const {
  Fnv1a f;
  f.update(canonical());
  return hex64(f.value());
}

DetectorParams DetectorParams::zeros(const DetectorConfig& cfg) {
  cfg.validate();
  DetectorParams p;
  p.config = cfg;
  int cin = 3;
  for (int b = 0; b < cfg.blocks(); ++b) {
    p.kernels.push_back(grad::Tensor::zeros({cfg.channels[b], cin, 3, 3}, true));
    p.biases.push_back(grad::Tensor::zeros({cfg.channels[b]}, true));
    cin = cfg.channels[b];
  }
  p.kernels.push_back(grad::Tensor::zeros({cfg.head_channels(), cin, 1, 1}, true));
  p.biases.push_back(grad::Tensor::zeros({cfg.head_channels()}, true));
  return p;
}

DetectorParams DetectorParams::init(const DetectorConfig& cfg, std::uint64_t seed) {
  DetectorParams p = zeros(cfg);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < p.kernels.size(); ++i) {
    auto& k = p.kernels[i];
    const bool head = i + 1 == p.kernels.size();
    const double fan_in = static_cast<double>(k.dim(1) * k.dim(2) * k.dim(3));
    const double stddev = head ? 0.01 : std::sqrt(2.0 / fan_in);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : k.mutable_data()) v = dist(rng);
  }
  p.biases.back().mutable_data()[kObj] = -4.0;
  return p;
}

std::vector<grad::Tensor> DetectorParams::parameters() const {
  std::vector<grad::Tensor> out(kernels);
  out.insert(out.end(), biases.begin(), biases.end());
  return out;
}

std::vector<std::string> DetectorParams::parameter_names() const {
  std::vector<std::string> names;
  const int n = static_cast<int>(kernels.size());
  auto block = [n](int i) {
    return i + 1 == n ? std::string("head") : "block" + std::to_string(i + 1);
  };
  for (int i = 0; i < n; ++i) names.push_back(block(i) + ".kernel");
  for (int i = 0; i < n; ++i) names.push_back(block(i) + ".bias");
  return names;
}

std::size_t DetectorParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.size();
  return n;
}

DetectorParams DetectorParams::clone(bool requires_grad) const {
  DetectorParams p;
  p.config = config;
  for (const auto& k : kernels) {
    p.kernels.push_back(grad::Tensor::from(k.shape(), {k.data().begin(), k.data().end()}, requires_grad));
  }
  for (const auto& b : biases) {
    p.biases.push_back(grad::Tensor::from(b.shape(), {b.data().begin(), b.data().end()}, requires_grad));
  }
  return p;
}

void DetectorParams::zero_grad() {
  for (auto& t : kernels) t.zero_grad();
  for (auto& t : biases) t.zero_grad();
}

std::uint64_t DetectorParams::digest() const {
  Fnv1a f;
  for (const auto& t : parameters()) f.update(t.data().data(), t.size() * sizeof(double));
  return f.value();
}

ForwardResult forward(const DetectorParams& params, const grad::Tensor& image) {
  const DetectorConfig& cfg = params.config;
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != cfg.image_side ||
      image.dim(2) != cfg.image_side) {
    throw ConfigError("detector forward: image must be 3x" + std::to_string(cfg.image_side) + "x" +
                      std::to_string(cfg.image_side));
  }
  ForwardResult out;
  grad::Tensor x = image;
  std::size_t next_tap = 0;
  for (int b = 0; b < cfg.blocks(); ++b) {
    // A 3x3/pad-1 conv cannot halve an even side exactly, so downsampling
    // blocks pool first.
    for (int f = cfg.strides[b]; f > 1; f /= 2) x = grad::max_pool2d(x);
    x = grad::conv2d(x, params.kernels[b], 1, 1);
    x = grad::leaky_relu(grad::add_channel_bias(x, params.biases[b]), cfg.leaky_slope);
    if (next_tap < cfg.taps.size() && cfg.taps[next_tap] == b + 1) {
      out.taps.push_back(x);
      ++next_tap;
    }
  }
  grad::Tensor head = grad::conv2d(x, params.kernels.back(), 1, 0);
  head = grad::add_channel_bias(head, params.biases.back());

  // [K, S, S] -> [S, S, K]
  const int k = head.dim(0), s = head.dim(1);
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(k) * s * s);
  for (int cell = 0; cell < s * s; ++cell) {
    for (int ch = 0; ch < k; ++ch) idx.push_back(static_cast<std::int64_t>(ch) * s * s + cell);
  }
  out.head = grad::gather(head, std::move(idx), {s, s, k});
  return out;
}

ForwardResult forward(const DetectorParams& params, const Image& image) {
  return forward(params, to_chw(image));
}

std::vector<Detection> decode(std::span<const double> head, const DetectorConfig& cfg,
                              double conf_threshold) {
  const int s = cfg.grid_side();
  const int k = cfg.head_channels();
  if (head.size() != static_cast<std::size_t>(s) * s * k) {
    throw ConfigError("decode: head size does not match the detector config");
  }
  std::vector<Detection> dets;
  for (int cell = 0; cell < s * s; ++cell) {
    const double* v = head.data() + static_cast<std::size_t>(cell) * k;
    int best = 0;
    double best_p = -1.0;
    for (int c = 0; c < cfg.num_classes; ++c) {
      double pc = sigmoid(v[kCls0 + c]);
      if (pc > best_p) {
        best_p = pc;
        best = c;
      }
    }
    const double score = sigmoid(v[kObj]) * best_p;
    if (score < conf_threshold) continue;
    const int gx = cell % s, gy = cell / s;
    Box b;
    b.xc = (gx + sigmoid(v[kTx])) / s;
    b.yc = (gy + sigmoid(v[kTy])) / s;
    b.w = std::clamp(cfg.anchor_w * std::exp(v[kTw]), 0.0, 1.0);
    b.h = std::clamp(cfg.anchor_h * std::exp(v[kTh]), 0.0, 1.0);
    // Clip to the image, keeping center form.
    const double x1 = std::max(0.0, b.x1()), x2 = std::min(1.0, b.x2());
    const double y1 = std::max(0.0, b.y1()), y2 = std::min(1.0, b.y2());
    b = Box{(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1};
    dets.push_back(Detection{best, score, b, cell});
  }
  return dets;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.cell < b.cell;
  });
  std::vector<Detection> keep;
  std::vector<bool> dead(dets.size(), false);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dead[i]) continue;
    keep.push_back(dets[i]);
    for (std::size_t j = i + 1; j < dets.size(); ++j) {
      if (!dead[j] && dets[j].cls == dets[i].cls && iou(dets[i].box, dets[j].box) > iou_threshold) {
        dead[j] = true;
      }
    }
  }
  return keep;
}

std::vector<Detection> detect(const DetectorParams& params, const Image& image,
                              double conf_threshold, double nms_iou) {
  auto fr = forward(params, image);
  return nms(decode(fr.head, params.config, conf_threshold), nms_iou);
}

}  // namespace rba::det

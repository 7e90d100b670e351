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

#include "rba/detector/boxes.hpp"
#include "rba/gradcore/tensor.hpp"
#include "rba/image.hpp"

namespace rba::det {

// Per-cell channel layout of the head output.
enum HeadChannel : int { kTx = 0, kTy = 1, kTw = 2, kTh = 3, kObj = 4, kCls0 = 5 };

// Architecture of the toy single-scale grid detector.
struct DetectorConfig {
  int image_side = 64;
  int num_classes = 4;
  std::vector<int> channels{8, 16, 16, 32, 32, 64, 64};
  std::vector<int> strides{1, 2, 1, 2, 1, 2, 1};
  std::vector<int> taps{3, 5, 7};  // 1-based backbone block indices
  double anchor_w = 0.25;
  double anchor_h = 0.25;
  double leaky_slope = 0.1;

  int blocks() const { return static_cast<int>(channels.size()); }
  int head_channels() const { return 5 + num_classes; }
  // image_side / product(strides); validate() checks divisibility.
  int grid_side() const;
  void validate() const;
  // Canonical text form; the digest is FNV-1a over it.
  std::string canonical() const;
  std::string digest() const;

  bool operator==(const DetectorConfig&) const = default;
};

struct DetectorParams {
  DetectorConfig config;
  // kernels[0..blocks-1] are 3x3 backbone kernels, kernels[blocks] is the 1x1 head.
  std::vector<grad::Tensor> kernels;
  std::vector<grad::Tensor> biases;

  // He-normal kernels, zero biases, objectness bias -4.
  static DetectorParams init(const DetectorConfig& cfg, std::uint64_t seed);
  static DetectorParams zeros(const DetectorConfig& cfg);

  // Kernels then biases, block order.
  std::vector<grad::Tensor> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;

  // Deep copy with fresh leaves.
  DetectorParams clone(bool requires_grad = true) const;
  void zero_grad();
  // FNV-1a over the raw bytes of every parameter value.
  std::uint64_t digest() const;
};

struct ForwardResult {
  grad::Tensor head;               // [S, S, 5 + C] raw outputs
  std::vector<grad::Tensor> taps;  // backbone block outputs at config.taps
};

// `image` is [3, S_img, S_img]. Throws ConfigError on any other size.
ForwardResult forward(const DetectorParams& params, const grad::Tensor& image);
ForwardResult forward(const DetectorParams& params, const Image& image);

// Per cell: Score_B = sigmoid(obj) * max_c sigmoid(cls_c); center =
// (cell + sigmoid(t)) / S; size = anchor * exp(t) clamped to [0,1]. Boxes are
// clipped to the image. Keeps Score_B >= conf_threshold, in cell order.
std::vector<Detection> decode(std::span<const double> head, const DetectorConfig& cfg,
                              double conf_threshold);
inline std::vector<Detection> decode(const grad::Tensor& head, const DetectorConfig& cfg,
                                     double conf_threshold) {
  return decode(head.data(), cfg, conf_threshold);
}

// Greedy class-wise NMS; suppresses same-class boxes with IoU > iou_threshold.
// Output sorted by Score_B descending, ties by lower cell index.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold);

inline constexpr double kDefaultConfThreshold = 0.25;
inline constexpr double kDefaultNmsIou = 0.45;

// Forward + decode + NMS on one image.
std::vector<Detection> detect(const DetectorParams& params, const Image& image,
                              double conf_threshold = kDefaultConfThreshold,
                              double nms_iou = kDefaultNmsIou);

struct LossWeights {
  double cls = 0.5;
  double box = 0.05;
  double obj = 1.0;
};

// Target assignment for one image: the cell containing an annotation's
// center is positive; earlier annotations win ties.
struct CellTarget {
  int cell = 0;
  int annotation = 0;  // index into the annotation list
};
std::vector<CellTarget> assign_targets(std::span<const Annotation> anns, const DetectorConfig& cfg);

struct DetectionLoss {
  grad::Tensor total;  // cls * L_cls + box * L_box + obj * L_obj
  grad::Tensor cls;
  grad::Tensor box;
  grad::Tensor obj;
};

// Composite detection loss L_y on one raw head tensor.
DetectionLoss detection_loss(const grad::Tensor& head, std::span<const Annotation> anns,
                             const DetectorConfig& cfg, const LossWeights& w = {});

// Checkpoint container (JSON). `meta_json` is an arbitrary JSON object stored
// alongside the parameters.
void save_checkpoint(const std::string& path, const DetectorParams& params,
                     const std::string& meta_json = "{}");
struct LoadedCheckpoint {
  DetectorParams params;
  std::string meta_json;
};
// Throws ParseError on malformed files; ConfigError if `expected` is given and
// its digest differs from the stored one.
LoadedCheckpoint load_checkpoint(const std::string& path, const DetectorConfig* expected = nullptr);

}  // namespace rba::det

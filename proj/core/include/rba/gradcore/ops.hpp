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
#include <vector>

#include "rba/gradcore/tensor.hpp"

namespace rba::grad {

inline constexpr double kBceClamp = 1e-7;

// Elementwise, same-shape binary ops.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

// Scalar ops.
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

// Unary.
Tensor exp(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.1);
Tensor atan(const Tensor& a);
Tensor square(const Tensor& a);
// Gradient passes only where lo < a < hi.
Tensor clamp(const Tensor& a, double lo, double hi);

// Reductions to a scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Structural.
Tensor reshape(const Tensor& a, Shape shape);
// out[i] = a.flat[index[i]]; backward scatter-adds.
Tensor gather(const Tensor& a, std::vector<std::int64_t> index, Shape out_shape);
// Concatenation along the leading axis; trailing dims must agree.
Tensor concat(const std::vector<Tensor>& parts);

// Image ops on [C,H,W] tensors.
// Cross-correlation; kernel is [C_out,C_in,k,k] with odd k.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad);
// x[C,H,W] + bias[C] broadcast over spatial positions.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);
// 2x2 window, stride 2; H and W must be even.
Tensor max_pool2d(const Tensor& x);
Tensor resize_nearest(const Tensor& x, int out_h, int out_w);
// Half-pixel centers, edge-clamped (align_corners = false).
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);

// mean(-[t ln p + (1-t) ln(1-p)]) with p clamped to [kBceClamp, 1-kBceClamp].
// Differentiable w.r.t. pred only.
Tensor bce(const Tensor& pred, const Tensor& target);

}  // namespace rba::grad

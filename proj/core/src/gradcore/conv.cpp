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

// conv2d via im2col + GEMM. Eigen only supplies the matrix products.

#include <Eigen/Core>
#include <string>

#include "rba/errors.hpp"
#include "rba/gradcore/ops.hpp"

namespace rba::grad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct Geometry {
  int cin, h, w, cout, k, stride, pad, oh, ow;
  int rows() const { return cin * k * k; }
  int cols() const { return oh * ow; }
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

void im2col(const double* in, const Geometry& g, double* out) {
  const int n = g.cols();
  for (int c = 0; c < g.cin; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        double* row = out + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * n;
        for (int oi = 0; oi < g.oh; ++oi) {
          const int ii = oi * g.stride - g.pad + ki;
          double* dst = row + oi * g.ow;
          if (ii < 0 || ii >= g.h) {
            std::fill(dst, dst + g.ow, 0.0);
            continue;
          }
          const double* src = in + (static_cast<std::size_t>(c) * g.h + ii) * g.w;
          for (int oj = 0; oj < g.ow; ++oj) {
            const int jj = oj * g.stride - g.pad + kj;
            dst[oj] = (jj >= 0 && jj < g.w) ? src[jj] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const Geometry& g, double* in_grad) {
  const int n = g.cols();
  for (int c = 0; c < g.cin; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        const double* row = cols + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * n;
        for (int oi = 0; oi < g.oh; ++oi) {
          const int ii = oi * g.stride - g.pad + ki;
          if (ii < 0 || ii >= g.h) continue;
          double* dst = in_grad + (static_cast<std::size_t>(c) * g.h + ii) * g.w;
          const double* src = row + oi * g.ow;
          for (int oj = 0; oj < g.ow; ++oj) {
            const int jj = oj * g.stride - g.pad + kj;
            if (jj >= 0 && jj < g.w) dst[jj] += src[oj];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  if (input.rank() != 3) throw ConfigError("conv2d: input must be [C_in,H,W]");
  if (kernel.rank() != 4) throw ConfigError("conv2d: kernel must be [C_out,C_in,k,k]");
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (pad < 0) throw ConfigError("conv2d: pad must be >= 0");
  Geometry g{};
  g.cin = input.dim(0);
  g.h = input.dim(1);
  g.w = input.dim(2);
  g.cout = kernel.dim(0);
  g.k = kernel.dim(2);
  g.stride = stride;
  g.pad = pad;
  if (kernel.dim(1) != g.cin) throw ConfigError("conv2d: channel mismatch between input and kernel");
  if (kernel.dim(3) != g.k) throw ConfigError("conv2d: kernel must be square");
  if (g.k % 2 == 0) throw ConfigError("conv2d: kernel size must be odd");
  const int span_h = g.h + 2 * pad - g.k;
  const int span_w = g.w + 2 * pad - g.k;
  if (span_h < 0 || span_w < 0 || span_h % stride != 0 || span_w % stride != 0) {
    throw ConfigError("conv2d: output size is not an exact integer (H=" + std::to_string(g.h) +
                      ", k=" + std::to_string(g.k) + ", stride=" + std::to_string(stride) +
                      ", pad=" + std::to_string(pad) + ")");
  }
  g.oh = span_h / stride + 1;
  g.ow = span_w / stride + 1;

  std::vector<double> cols;
  const double* cols_ptr = input.data().data();
  if (!g.pointwise()) {
    cols.resize(static_cast<std::size_t>(g.rows()) * g.cols());
    im2col(input.data().data(), g, cols.data());
    cols_ptr = cols.data();
  }

  std::vector<double> out(static_cast<std::size_t>(g.cout) * g.cols());
  ConstMapMat kmat(kernel.data().data(), g.cout, g.rows());
  ConstMapMat cmat(cols_ptr, g.rows(), g.cols());
  MapMat omat(out.data(), g.cout, g.cols());
  omat.noalias() = kmat * cmat;

  // Pointwise convs read the input directly in backward, so only keep the
  // im2col buffer when it exists and the kernel needs its gradient.
  if (!kernel.requires_grad()) cols.clear();

  return Tensor::make_result(
      {g.cout, g.oh, g.ow}, std::move(out), {input, kernel},
      [g, cols = std::move(cols)](detail::Node& self) {
        detail::Node& pin = *self.parents[0];
        detail::Node& pk = *self.parents[1];
        ConstMapMat gout(self.grad.data(), g.cout, g.cols());
        if (pk.requires_grad) {
          const double* c = g.pointwise() ? pin.value.data() : cols.data();
          ConstMapMat cmat(c, g.rows(), g.cols());
          MapMat gk(pk.ensure_grad().data(), g.cout, g.rows());
          gk.noalias() += gout * cmat.transpose();
        }
        if (pin.requires_grad) {
          ConstMapMat kmat(pk.value.data(), g.cout, g.rows());
          if (g.pointwise()) {
            MapMat gin(pin.ensure_grad().data(), g.rows(), g.cols());
            gin.noalias() += kmat.transpose() * gout;
          } else {
            std::vector<double> gcols(static_cast<std::size_t>(g.rows()) * g.cols());
            MapMat gc(gcols.data(), g.rows(), g.cols());
            gc.noalias() = kmat.transpose() * gout;
            col2im_add(gcols.data(), g, pin.ensure_grad().data());
          }
        }
      });
}

}  // namespace rba::grad

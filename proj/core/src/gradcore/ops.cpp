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

#include "rba/gradcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rba/errors.hpp"

namespace rba::grad {
namespace {

using detail::Node;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ConfigError(std::string(op) + ": shape mismatch");
  }
}

// y = f(x) elementwise; dy/dx = df(x, y).
template <class F, class DF>
Tensor unary(const Tensor& a, F f, DF df) {
  const auto x = a.data();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return Tensor::make_result(a.shape(), std::move(y), {a}, [df](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * df(p.value[i], self.value[i]);
    }
  });
}

// z = f(x, y) elementwise with partials (dz/dx, dz/dy) = (dfa, dfb)(x, y).
template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, DA da, DB db) {
  require_same_shape(a, b, name);
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = f(x[i], y[i]);
  return Tensor::make_result(a.shape(), std::move(z), {a, b}, [da, db](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * da(pa.value[i], pb.value[i]);
      }
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * db(pa.value[i], pb.value[i]);
      }
    }
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

void check_chw(const Tensor& x, const char* op) {
  if (x.rank() != 3) throw ConfigError(std::string(op) + ": expected a [C,H,W] tensor");
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

// Ties send the gradient to the first operand.
Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "minimum", [](double x, double y) { return std::min(x, y); },
      [](double x, double y) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "maximum", [](double x, double y) { return std::max(x, y); },
      [](double x, double y) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary(
      a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Tensor atan(const Tensor& a) {
  return unary(
      a, [](double x) { return std::atan(x); },
      [](double x, double) { return 1.0 / (1.0 + x * x); });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw ConfigError("clamp: lo > hi");
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::make_result({}, {s}, {a}, [](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (double& gi : g) gi += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ConfigError("mean of an empty tensor");
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) throw ConfigError("reshape: element count mismatch");
  std::vector<double> v(a.data().begin(), a.data().end());
  return Tensor::make_result(std::move(shape), std::move(v), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor gather(const Tensor& a, std::vector<std::int64_t> index, Shape out_shape) {
  if (numel(out_shape) != index.size()) throw ConfigError("gather: index count mismatch");
  const auto x = a.data();
  std::vector<double> y(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || static_cast<std::size_t>(index[i]) >= x.size()) {
      throw ConfigError("gather: index out of range");
    }
    y[i] = x[static_cast<std::size_t>(index[i])];
  }
  return Tensor::make_result(std::move(out_shape), std::move(y), {a},
                             [index = std::move(index)](Node& self) {
                               Node& p = *self.parents[0];
                               auto& g = p.ensure_grad();
                               for (std::size_t i = 0; i < index.size(); ++i) {
                                 g[static_cast<std::size_t>(index[i])] += self.grad[i];
                               }
                             });
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ConfigError("concat: no inputs");
  Shape tail(parts[0].shape().begin() + (parts[0].rank() > 0 ? 1 : 0), parts[0].shape().end());
  int lead = 0;
  std::vector<double> v;
  for (const auto& t : parts) {
    if (t.rank() == 0) throw ConfigError("concat: scalar input");
    Shape t_tail(t.shape().begin() + 1, t.shape().end());
    if (t_tail != tail) throw ConfigError("concat: trailing shape mismatch");
    lead += t.dim(0);
    v.insert(v.end(), t.data().begin(), t.data().end());
  }
  Shape out{lead};
  out.insert(out.end(), tail.begin(), tail.end());
  return Tensor::make_result(std::move(out), std::move(v), parts, [](Node& self) {
    std::size_t off = 0;
    for (auto& pp : self.parents) {
      Node& p = *pp;
      if (p.requires_grad) {
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[off + i];
      }
      off += p.value.size();
    }
  });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  check_chw(x, "add_channel_bias");
  const int c = x.dim(0);
  if (bias.rank() != 1 || bias.dim(0) != c) throw ConfigError("add_channel_bias: bias shape");
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  std::vector<double> y(x.data().begin(), x.data().end());
  for (int ch = 0; ch < c; ++ch) {
    const double b = bias[ch];
    for (std::size_t i = 0; i < plane; ++i) y[ch * plane + i] += b;
  }
  return Tensor::make_result(x.shape(), std::move(y), {x, bias}, [c, plane](Node& self) {
    Node& px = *self.parents[0];
    Node& pb = *self.parents[1];
    if (px.requires_grad) {
      auto& g = px.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += self.grad[ch * plane + i];
        g[ch] += s;
      }
    }
  });
}

Tensor max_pool2d(const Tensor& x) {
  check_chw(x, "max_pool2d");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 != 0 || w % 2 != 0) throw ConfigError("max_pool2d: odd spatial size");
  const int oh = h / 2, ow = w / 2;
  const auto v = x.data();
  std::vector<double> y(static_cast<std::size_t>(c) * oh * ow);
  std::vector<std::int64_t> arg(y.size());
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        std::int64_t best = (static_cast<std::int64_t>(ch) * h + 2 * i) * w + 2 * j;
        for (int di = 0; di < 2; ++di) {
          for (int dj = 0; dj < 2; ++dj) {
            std::int64_t k = (static_cast<std::int64_t>(ch) * h + 2 * i + di) * w + 2 * j + dj;
            if (v[k] > v[best]) best = k;
          }
        }
        std::size_t o = (static_cast<std::size_t>(ch) * oh + i) * ow + j;
        y[o] = v[best];
        arg[o] = best;
      }
    }
  }
  return Tensor::make_result({c, oh, ow}, std::move(y), {x}, [arg = std::move(arg)](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t o = 0; o < arg.size(); ++o) g[arg[o]] += self.grad[o];
  });
}

Tensor resize_nearest(const Tensor& x, int out_h, int out_w) {
  check_chw(x, "resize_nearest");
  if (out_h < 1 || out_w < 1) throw ConfigError("resize_nearest: empty output");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<std::int64_t> index;
  index.reserve(static_cast<std::size_t>(c) * out_h * out_w);
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < out_h; ++i) {
      int si = std::min(h - 1, static_cast<int>(std::floor((i + 0.5) * h / out_h)));
      for (int j = 0; j < out_w; ++j) {
        int sj = std::min(w - 1, static_cast<int>(std::floor((j + 0.5) * w / out_w)));
        index.push_back((static_cast<std::int64_t>(ch) * h + si) * w + sj);
      }
    }
  }
  return gather(x, std::move(index), {c, out_h, out_w});
}

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  check_chw(x, "resize_bilinear");
  if (out_h < 1 || out_w < 1) throw ConfigError("resize_bilinear: empty output");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);

  struct Tap {
    int lo, hi;
    double frac;
  };
  auto taps = [](int out, int in) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double src = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
      int lo = static_cast<int>(std::floor(src));
      int hi = std::min(lo + 1, in - 1);
      t[o] = {lo, hi, src - lo};
    }
    return t;
  };
  auto ty = taps(out_h, h);
  auto tx = taps(out_w, w);

  const auto v = x.data();
  std::vector<double> y(static_cast<std::size_t>(c) * out_h * out_w);
  for (int ch = 0; ch < c; ++ch) {
    const double* src = v.data() + static_cast<std::size_t>(ch) * h * w;
    for (int i = 0; i < out_h; ++i) {
      const Tap& a = ty[i];
      for (int j = 0; j < out_w; ++j) {
        const Tap& b = tx[j];
        double top = src[a.lo * w + b.lo] * (1 - b.frac) + src[a.lo * w + b.hi] * b.frac;
        double bot = src[a.hi * w + b.lo] * (1 - b.frac) + src[a.hi * w + b.hi] * b.frac;
        y[(static_cast<std::size_t>(ch) * out_h + i) * out_w + j] = top * (1 - a.frac) + bot * a.frac;
      }
    }
  }
  return Tensor::make_result(
      {c, out_h, out_w}, std::move(y), {x},
      [c, h, w, out_h, out_w, ty = std::move(ty), tx = std::move(tx)](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (int ch = 0; ch < c; ++ch) {
          double* dst = g.data() + static_cast<std::size_t>(ch) * h * w;
          for (int i = 0; i < out_h; ++i) {
            const Tap& a = ty[i];
            for (int j = 0; j < out_w; ++j) {
              const Tap& b = tx[j];
              double go = self.grad[(static_cast<std::size_t>(ch) * out_h + i) * out_w + j];
              dst[a.lo * w + b.lo] += go * (1 - a.frac) * (1 - b.frac);
              dst[a.lo * w + b.hi] += go * (1 - a.frac) * b.frac;
              dst[a.hi * w + b.lo] += go * a.frac * (1 - b.frac);
              dst[a.hi * w + b.hi] += go * a.frac * b.frac;
            }
          }
        }
      });
}

Tensor bce(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "bce");
  if (pred.size() == 0) throw ConfigError("bce: empty input");
  const auto p = pred.data();
  const auto t = target.data();
  const double n = static_cast<double>(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(t[i] >= 0.0 && t[i] <= 1.0)) throw ConfigError("bce: target outside [0,1]");
    double pc = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
    total -= t[i] * std::log(pc) + (1.0 - t[i]) * std::log1p(-pc);
  }
  return Tensor::make_result({}, {total / n}, {pred, target}, [n](Node& self) {
    Node& pp = *self.parents[0];
    if (!pp.requires_grad) return;
    const auto& tv = self.parents[1]->value;
    auto& g = pp.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      double x = pp.value[i];
      if (x <= kBceClamp || x >= 1.0 - kBceClamp) continue;
      g[i] += self.grad[0] * (-tv[i] / x + (1.0 - tv[i]) / (1.0 - x)) / n;
    }
  });
}

}  // namespace rba::grad

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


// Plain-double reference implementations used by the unit and acceptance
// suites. None of these call into the library's math.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "rba/detector/detector.hpp"
#include "rba/gradcore/tensor.hpp"
#include "rba/poisoncraft/poison.hpp"

namespace oracle {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Direct cross-correlation, [Ci,H,W] * [Co,Ci,k,k].
inline std::vector<double> conv2d(const std::vector<double>& in, int ci, int h, int w,
                                  const std::vector<double>& ker, int co, int k, int stride, int pad) {
  const int oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(co) * oh * ow, 0.0);
  for (int o = 0; o < co; ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0;
        for (int c = 0; c < ci; ++c)
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) {
              const int iy = y * stride + dy - pad, ix = x * stride + dx - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              s += in[(c * h + iy) * w + ix] * ker[((o * ci + c) * k + dy) * k + dx];
            }
        out[(o * oh + y) * ow + x] = s;
      }
  return out;
}

inline double bce(const std::vector<double>& p, const std::vector<double>& t) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], 1e-7, 1 - 1e-7);
    s += -(t[i] * std::log(q) + (1 - t[i]) * std::log(1 - q));
  }
  return s / static_cast<double>(p.size());
}

// Corner-form IoU.
inline double box_iou(const rba::det::Box& a, const rba::det::Box& b) {
  const double ax0 = a.xc - a.w / 2, ax1 = a.xc + a.w / 2, ay0 = a.yc - a.h / 2, ay1 = a.yc + a.h / 2;
  const double bx0 = b.xc - b.w / 2, bx1 = b.xc + b.w / 2, by0 = b.yc - b.h / 2, by1 = b.yc + b.h / 2;
  const double iw = std::min(ax1, bx1) - std::max(ax0, bx0);
  const double ih = std::min(ay1, by1) - std::max(ay0, by0);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.w * a.h + b.w * b.h - inter);
}

inline double ciou(const rba::det::Box& p, const rba::det::Box& g) {
  const double i = box_iou(p, g);
  const double rho2 = (p.xc - g.xc) * (p.xc - g.xc) + (p.yc - g.yc) * (p.yc - g.yc);
  const double cw = std::max(p.xc + p.w / 2, g.xc + g.w / 2) - std::min(p.xc - p.w / 2, g.xc - g.w / 2);
  const double ch = std::max(p.yc + p.h / 2, g.yc + g.h / 2) - std::min(p.yc - p.h / 2, g.yc - g.h / 2);
  const double v = 4.0 / (std::numbers::pi * std::numbers::pi) *
                   std::pow(std::atan(g.w / g.h) - std::atan(p.w / p.h), 2);
  const double alpha = v / ((1 - i) + v + 1e-9);
  return 1 - i + rho2 / (cw * cw + ch * ch) + alpha * v;
}

// Per-cell decode straight from the formulas.
inline std::vector<rba::det::Detection> decode(const std::vector<double>& head, int s, int nc, double aw,
                                               double ah, double conf) {
  std::vector<rba::det::Detection> out;
  const int k = 5 + nc;
  for (int gy = 0; gy < s; ++gy)
    for (int gx = 0; gx < s; ++gx) {
      const double* c = &head[(gy * s + gx) * k];
      int best = 0;
      for (int j = 1; j < nc; ++j)
        if (c[5 + j] > c[5 + best]) best = j;
      const double score = sigmoid(c[4]) * sigmoid(c[5 + best]);
      if (score < conf) continue;
      double xc = (gx + sigmoid(c[0])) / s, yc = (gy + sigmoid(c[1])) / s;
      double w = std::min(1.0, aw * std::exp(c[2])), h = std::min(1.0, ah * std::exp(c[3]));
      double x0 = std::max(0.0, xc - w / 2), x1 = std::min(1.0, xc + w / 2);
      double y0 = std::max(0.0, yc - h / 2), y1 = std::min(1.0, yc + h / 2);
      rba::det::Detection d;
      d.cls = best;
      d.score = score;
      d.box = {(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
      d.cell = gy * s + gx;
      out.push_back(d);
    }
  return out;
}

// Reference greedy NMS: visit in (score desc, cell asc) order, keep a box iff
// no kept same-class box overlaps it above the threshold.
inline std::vector<rba::det::Detection> nms(std::vector<rba::det::Detection> d, double thr) {
  std::sort(d.begin(), d.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : a.cell < b.cell;
  });
  std::vector<rba::det::Detection> kept;
  for (const auto& x : d) {
    bool ok = true;
    for (const auto& y : kept)
      if (y.cls == x.cls && box_iou(x.box, y.box) > thr) ok = false;
    if (ok) kept.push_back(x);
  }
  return kept;
}

// L_y assembled from scratch for one head.
inline std::array<double, 4> detection_loss(const std::vector<double>& head,
                                            const std::vector<rba::det::Annotation>& anns, int s, int nc,
                                            double aw, double ah, const rba::det::LossWeights& w) {
  const int k = 5 + nc;
  std::map<int, int> owner;
  for (int i = 0; i < static_cast<int>(anns.size()); ++i) {
    int gx = std::min(s - 1, static_cast<int>(std::floor(anns[i].box.xc * s)));
    int gy = std::min(s - 1, static_cast<int>(std::floor(anns[i].box.yc * s)));
    owner.emplace(gy * s + gx, i);
  }
  std::vector<double> op, ot;
  for (int c = 0; c < s * s; ++c) {
    op.push_back(sigmoid(head[c * k + 4]));
    ot.push_back(owner.count(c) ? 1.0 : 0.0);
  }
  const double lobj = bce(op, ot);
  double lcls = 0, lbox = 0;
  if (!owner.empty()) {
    std::vector<double> cp, ct;
    for (const auto& [cell, i] : owner) {
      for (int j = 0; j < nc; ++j) {
        cp.push_back(sigmoid(head[cell * k + 5 + j]));
        ct.push_back(anns[i].cls == j ? 1.0 : 0.0);
      }
    }
    lcls = bce(cp, ct);
    // Same per-box terms, averaged; order does not affect the mean.
    for (const auto& [cell, i] : owner) {
      const double* c = &head[cell * k];
      rba::det::Box p{(cell % s + sigmoid(c[0])) / s, (cell / s + sigmoid(c[1])) / s, aw * std::exp(c[2]),
                      ah * std::exp(c[3])};
      lbox += ciou(p, anns[i].box);
    }
    lbox /= static_cast<double>(owner.size());
  }
  return {w.cls * lcls + w.box * lbox + w.obj * lobj, lcls, lbox, lobj};
}

// AP via the interpolated precision at every recall step (one per true
// positive): sum over TP ranks of max precision at or after that rank, / npos.
inline double average_precision(const std::vector<std::vector<rba::det::Detection>>& dets,
                                const std::vector<std::vector<rba::det::Annotation>>& gts, int cls,
                                double thr) {
  struct R {
    double score;
    std::size_t img, k;
  };
  std::vector<R> all;
  for (std::size_t i = 0; i < dets.size(); ++i)
    for (std::size_t k = 0; k < dets[i].size(); ++k)
      if (dets[i][k].cls == cls) all.push_back({dets[i][k].score, i, k});
  std::stable_sort(all.begin(), all.end(), [](const R& a, const R& b) { return a.score > b.score; });
  std::size_t npos = 0;
  for (const auto& g : gts)
    for (const auto& a : g) npos += a.cls == cls;
  if (npos == 0) return 0.0;
  std::set<std::pair<std::size_t, std::size_t>> used;
  std::vector<int> tp;
  for (const auto& r : all) {
    double best = -1;
    std::size_t bj = 0;
    bool found = false;
    for (std::size_t j = 0; j < gts[r.img].size(); ++j) {
      if (gts[r.img][j].cls != cls || used.count({r.img, j})) continue;
      const double v = box_iou(dets[r.img][r.k].box, gts[r.img][j].box);
      if (v > best) {
        best = v;
        bj = j;
        found = true;
      }
    }
    const bool hit = found && best >= thr;
    if (hit) used.insert({r.img, bj});
    tp.push_back(hit);
  }
  std::vector<double> prec(tp.size());
  double c = 0;
  for (std::size_t r = 0; r < tp.size(); ++r) {
    c += tp[r];
    prec[r] = c / static_cast<double>(r + 1);
  }
  double ap = 0;
  for (std::size_t r = 0; r < tp.size(); ++r) {
    if (!tp[r]) continue;
    ap += *std::max_element(prec.begin() + static_cast<long>(r), prec.end());
  }
  return ap / static_cast<double>(npos);
}

// Fraction of attacked objects with no surviving same-class detection.
inline double asr(const std::vector<std::vector<rba::det::Detection>>& dets,
                  const std::vector<rba::poison::AttackedObject>& objs, int target, double conf, double thr) {
  std::size_t gone = 0;
  for (const auto& o : objs) {
    int hits = 0;
    for (const auto& d : dets[o.image_index])
      hits += d.cls == (target >= 0 ? target : o.original.cls) && d.score >= conf &&
              box_iou(d.box, o.original.box) >= thr;
    gone += hits == 0;
  }
  return static_cast<double>(gone) / static_cast<double>(objs.size());
}

// Round-trip through HSV with the saturation scaled.
inline std::array<double, 3> scale_saturation(std::array<double, 3> rgb, double f) {
  const double mx = std::max({rgb[0], rgb[1], rgb[2]}), mn = std::min({rgb[0], rgb[1], rgb[2]});
  const double v = mx, d = mx - mn;
  double s = mx > 0 ? d / mx : 0, h = 0;
  if (d > 0) {
    if (mx == rgb[0]) {
      h = std::fmod((rgb[1] - rgb[2]) / d, 6.0);
    } else if (mx == rgb[1]) {
      h = (rgb[2] - rgb[0]) / d + 2;
    } else {
      h = (rgb[0] - rgb[1]) / d + 4;
    }
    if (h < 0) h += 6;
  }
  s = std::clamp(s * f, 0.0, 1.0);
  const double c = v * s, x = c * (1 - std::fabs(std::fmod(h, 2.0) - 1)), m = v - c;
  std::array<double, 3> o{};
  switch (static_cast<int>(h) % 6) {
    case 0: o = {c, x, 0}; break;
    case 1: o = {x, c, 0}; break;
    case 2: o = {0, c, x}; break;
    case 3: o = {0, x, c}; break;
    case 4: o = {x, 0, c}; break;
    default: o = {c, 0, x}; break;
  }
  return {o[0] + m, o[1] + m, o[2] + m};
}

// Relative error used by the finite-difference checks.
inline double rel_err(double a, double n) {
  const double d = std::max({std::fabs(a), std::fabs(n), 1e-6});
  return std::fabs(a - n) / d;
}

// Worst relative error between autograd and central differences over the
// listed entries of `leaf`.
inline double fd_check(rba::grad::Tensor leaf, const std::function<rba::grad::Tensor()>& f,
                       const std::vector<std::size_t>& entries, double h = 1e-4) {
  leaf.zero_grad();
  rba::grad::backward(f());
  const std::vector<double> g(leaf.grad().begin(), leaf.grad().end());
  double worst = 0;
  for (std::size_t i : entries) {
    auto v = leaf.mutable_data();
    const double x0 = v[i];
    v[i] = x0 + h;
    const double fp = f().item();
    v[i] = x0 - h;
    const double fm = f().item();
    v[i] = x0;
    const double num = (fp - fm) / (2 * h);
    worst = std::max(worst, rel_err(g.empty() ? 0.0 : g[i], num));
  }
  return worst;
}

inline std::vector<std::size_t> all_entries(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

inline std::vector<std::size_t> some_entries(std::size_t n, std::size_t count, std::mt19937_64& rng) {
  if (n <= count) return all_entries(n);
  std::vector<std::size_t> v;
  std::uniform_int_distribution<std::size_t> u(0, n - 1);
  for (std::size_t i = 0; i < count; ++i) v.push_back(u(rng));
  return v;
}

inline std::vector<double> uniform(std::size_t n, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline rba::det::Box random_box(std::mt19937_64& rng, double min_side = 0.05, double max_side = 0.5) {
  std::uniform_real_distribution<double> sz(min_side, max_side);
  const double w = sz(rng), h = sz(rng);
  std::uniform_real_distribution<double> cx(w / 2, 1 - w / 2), cy(h / 2, 1 - h / 2);
  return {cx(rng), cy(rng), w, h};
}

// Two-class ground truth, 0..3 boxes per image.
inline std::vector<std::vector<rba::det::Annotation>> random_gts(std::mt19937_64& rng, int images) {
  std::uniform_int_distribution<int> n(0, 3), cls(0, 1);
  std::vector<std::vector<rba::det::Annotation>> gts(static_cast<std::size_t>(images));
  for (auto& g : gts)
    for (int k = n(rng); k > 0; --k) g.push_back({cls(rng), random_box(rng, 0.1, 0.3)});
  return gts;
}

// Jittered hits, class confusions and clutter with coarse (tied) scores.
inline std::vector<std::vector<rba::det::Detection>> random_detections(
    std::mt19937_64& rng, const std::vector<std::vector<rba::det::Annotation>>& gts) {
  std::uniform_real_distribution<double> u(0, 1), jitter(-0.05, 0.05);
  std::uniform_int_distribution<int> cls(0, 1), extra(0, 3);
  std::vector<std::vector<rba::det::Detection>> dets(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    for (const auto& g : gts[i]) {
      if (u(rng) < 0.7) {
        rba::det::Box b = g.box;
        b.xc = std::clamp(b.xc + jitter(rng), b.w / 2, 1 - b.w / 2);
        const int c = u(rng) < 0.85 ? g.cls : 1 - g.cls;
        dets[i].push_back({c, std::round(u(rng) * 20) / 20, b, 0});
      }
    }
    for (int k = extra(rng); k > 0; --k) {
      const int c = cls(rng);
      const double sc = std::round(u(rng) * 20) / 20;
      dets[i].push_back({c, sc, random_box(rng), 0});
    }
  }
  return dets;
}

}  // namespace oracle

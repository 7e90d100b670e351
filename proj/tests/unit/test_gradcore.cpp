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


#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../common/oracles.hpp"
#include "rba/errors.hpp"
#include "rba/gradcore/ops.hpp"

namespace {

using rba::grad::Tensor;
namespace g = rba::grad;

Tensor rand_tensor(g::Shape s, std::mt19937_64& rng, bool grad = true, double lo = -1, double hi = 1) {
  return Tensor::from(s, oracle::uniform(g::numel(s), rng, lo, hi), grad);
}

TEST(Conv2d, ZeroInputGivesZeroOutput) {
  std::mt19937_64 rng(1);
  Tensor out = g::conv2d(Tensor::zeros({1, 3, 3}), rand_tensor({1, 1, 3, 3}, rng, false), 1, 0);
  ASSERT_EQ(out.shape(), (g::Shape{1, 1, 1}));
  EXPECT_EQ(out.item(), 0.0);
}

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 rng(2);
  Tensor x = rand_tensor({1, 4, 5}, rng, false);
  Tensor out = g::conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0), 1, 0);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(out[i], x[i]);
}

TEST(Conv2d, MatchesNestedLoops) {
  std::mt19937_64 rng(3);
  Tensor x = rand_tensor({2, 5, 5}, rng, false), k = rand_tensor({3, 2, 3, 3}, rng, false);
  for (int pad : {0, 1}) {
    Tensor out = g::conv2d(x, k, 1, pad);
    const auto ref = oracle::conv2d({x.data().begin(), x.data().end()}, 2, 5, 5,
                                    {k.data().begin(), k.data().end()}, 3, 3, 1, pad);
    ASSERT_EQ(out.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out[i], ref[i], 1e-10);
  }
}

TEST(Conv2d, StrideTwoMatchesNestedLoops) {
  std::mt19937_64 rng(4);
  Tensor x = rand_tensor({3, 7, 7}, rng, false), k = rand_tensor({2, 3, 3, 3}, rng, false);
  Tensor out = g::conv2d(x, k, 2, 1);
  const auto ref = oracle::conv2d({x.data().begin(), x.data().end()}, 3, 7, 7,
                                  {k.data().begin(), k.data().end()}, 2, 3, 2, 1);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out[i], ref[i], 1e-10);
}

TEST(Conv2d, ShapeErrors) {
  EXPECT_THROW(g::conv2d(Tensor::zeros({2, 5, 5}), Tensor::zeros({1, 3, 3, 3}), 1, 0), rba::ConfigError);
  EXPECT_THROW(g::conv2d(Tensor::zeros({1, 6, 6}), Tensor::zeros({1, 1, 3, 3}), 2, 0), rba::ConfigError);
  EXPECT_THROW(g::conv2d(Tensor::zeros({1, 5, 5}), Tensor::zeros({1, 1, 2, 2}), 1, 0), rba::ConfigError);
}

TEST(Bce, SymmetricPoint) {
  EXPECT_NEAR(g::bce(Tensor::scalar(0.5), Tensor::scalar(0.5)).item(), std::log(2.0), 1e-12);
}

TEST(Bce, PerfectPredictionNearZero) {
  EXPECT_NEAR(g::bce(Tensor::scalar(1 - 1e-7), Tensor::scalar(1.0)).item(), 1e-7, 1e-9);
}

TEST(Bce, HandFormula) {
  const double expected = -(std::log(0.8) + std::log(0.9)) / 2;
  EXPECT_NEAR(g::bce(Tensor::from({2}, {0.2, 0.9}), Tensor::from({2}, {0.0, 1.0})).item(), expected, 1e-10);
  EXPECT_NEAR(expected, oracle::bce({0.2, 0.9}, {0.0, 1.0}), 1e-15);
}

TEST(Bce, ShapeMismatch) {
  EXPECT_THROW(g::bce(Tensor::zeros({2}), Tensor::zeros({3})), rba::ConfigError);
}

TEST(Backward, SumGivesOnes) {
  std::mt19937_64 rng(5);
  Tensor x = rand_tensor({2, 3, 4}, rng);
  g::backward(g::sum(x));
  for (double v : x.grad()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, QuadraticGivesInput) {
  std::mt19937_64 rng(6);
  Tensor x = rand_tensor({5, 2}, rng);
  g::backward(g::mul_scalar(g::sum(x * x), 0.5));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x.grad()[i], x[i], 1e-15);
}

TEST(Backward, AccumulatesUntilZeroed) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  g::backward(g::sum(x));
  g::backward(g::sum(x));
  EXPECT_EQ(x.grad()[0], 2.0);
  x.zero_grad();
  g::backward(g::sum(x));
  EXPECT_EQ(x.grad()[1], 1.0);
}

TEST(Backward, ConstantLeavesGetNoGradient) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true), c = Tensor::from({2}, {3.0, 4.0}, false);
  g::backward(g::sum(x * c));
  EXPECT_TRUE(c.grad().empty());
  EXPECT_EQ(x.grad()[1], 4.0);
}

TEST(Backward, SharedSubgraphVisitedOnce) {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor y = x * x;
  g::backward(y + y);
  EXPECT_NEAR(x.grad()[0], 12.0, 1e-12);
}

TEST(Backward, RejectsNonScalar) {
  EXPECT_THROW(g::backward(Tensor::zeros({2}, true)), rba::ConfigError);
}

// Finite differences on every differentiable op.
struct OpCase {
  const char* name;
  std::function<Tensor(const Tensor&, const Tensor&)> f;
  g::Shape a, b;
  double lo = -1, hi = 1;
  bool b_differentiable = true;
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const OpCase& c = GetParam();
  std::mt19937_64 rng(11);
  Tensor a = rand_tensor(c.a, rng, true, c.lo, c.hi), b = rand_tensor(c.b, rng, true, c.lo, c.hi);
  Tensor w = rand_tensor(c.f(a, b).shape(), rng, false);
  auto loss = [&] { return g::sum(c.f(a, b) * w); };
  EXPECT_LE(oracle::fd_check(a, loss, oracle::all_entries(a.size())), 1e-3) << c.name;
  if (c.b_differentiable) {
    EXPECT_LE(oracle::fd_check(b, loss, oracle::all_entries(b.size())), 1e-3) << c.name;
  }
}

INSTANTIATE_TEST_SUITE_P(
    Ops, OpGradient,
    ::testing::Values(
        OpCase{"add", [](auto& a, auto& b) { return a + b; }, {3, 4}, {3, 4}},
        OpCase{"sub", [](auto& a, auto& b) { return a - b; }, {3, 4}, {3, 4}},
        OpCase{"mul", [](auto& a, auto& b) { return a * b; }, {3, 4}, {3, 4}},
        OpCase{"div", [](auto& a, auto& b) { return a / b; }, {6}, {6}, 0.5, 2.0},
        OpCase{"minimum", [](auto& a, auto& b) { return g::minimum(a, b); }, {8}, {8}},
        OpCase{"maximum", [](auto& a, auto& b) { return g::maximum(a, b); }, {8}, {8}},
        OpCase{"exp", [](auto& a, auto& b) { return g::exp(a) + b; }, {5}, {5}},
        OpCase{"sigmoid", [](auto& a, auto& b) { return g::sigmoid(a * b); }, {5}, {5}},
        OpCase{"leaky_relu", [](auto& a, auto& b) { return g::leaky_relu(a) * b; }, {9}, {9}},
        OpCase{"atan", [](auto& a, auto& b) { return g::atan(a / b); }, {5}, {5}, 0.5, 2.0},
        OpCase{"square", [](auto& a, auto& b) { return g::square(a) - b; }, {5}, {5}},
        OpCase{"scalar_ops", [](auto& a, auto& b) { return g::add_scalar(g::mul_scalar(g::neg(a), 3.0), 1.0) * b; },
               {4}, {4}},
        OpCase{"clamp", [](auto& a, auto& b) { return g::clamp(a, -0.5, 0.5) * b; }, {9}, {9}},
        OpCase{"mean", [](auto& a, auto& b) { return g::mean(a * b); }, {3, 3}, {3, 3}},
        OpCase{"reshape", [](auto& a, auto& b) { return g::reshape(a, {6}) * b; }, {2, 3}, {6}},
        OpCase{"gather", [](auto& a, auto& b) { return g::gather(a, {0, 3, 3, 5}, {4}) * b; }, {6}, {4}},
        OpCase{"concat", [](auto& a, auto& b) { return g::concat({a, b, a}); }, {3}, {2}},
        OpCase{"conv2d", [](auto& a, auto& b) { return g::conv2d(a, b, 1, 1); }, {2, 5, 5}, {3, 2, 3, 3}},
        OpCase{"conv2d_s2", [](auto& a, auto& b) { return g::conv2d(a, b, 2, 1); }, {2, 5, 5}, {2, 2, 3, 3}},
        OpCase{"bias", [](auto& a, auto& b) { return g::add_channel_bias(a, b); }, {3, 2, 2}, {3}},
        OpCase{"max_pool", [](auto& a, auto& b) { return g::max_pool2d(a) * b; }, {2, 4, 4}, {2, 2, 2}},
        OpCase{"resize_nearest", [](auto& a, auto& b) { return g::resize_nearest(a, 5, 3) * b; }, {2, 3, 4},
               {2, 5, 3}},
        OpCase{"resize_bilinear", [](auto& a, auto& b) { return g::resize_bilinear(a, 5, 7) * b; }, {2, 3, 4},
               {2, 5, 7}},
        OpCase{"bce", [](auto& a, auto& b) { return g::bce(g::sigmoid(a), g::sigmoid(b)); }, {6}, {6}, -1, 1, false}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(Gradient, ThreeLayerConvNet) {
  std::mt19937_64 rng(12);
  Tensor x = rand_tensor({2, 7, 7}, rng, true, 0, 1);
  Tensor k1 = rand_tensor({3, 2, 3, 3}, rng), b1 = rand_tensor({3}, rng);
  Tensor k2 = rand_tensor({4, 3, 3, 3}, rng), b2 = rand_tensor({4}, rng);
  Tensor k3 = rand_tensor({2, 4, 1, 1}, rng), b3 = rand_tensor({2}, rng);
  auto loss = [&] {
    Tensor h = g::leaky_relu(g::add_channel_bias(g::conv2d(x, k1, 1, 1), b1));
    h = g::sigmoid(g::add_channel_bias(g::conv2d(h, k2, 2, 1), b2));
    h = g::add_channel_bias(g::conv2d(h, k3, 1, 0), b3);
    return g::sum(g::square(h));
  };
  for (Tensor* t : {&x, &k1, &b1, &k2, &b2, &k3, &b3}) {
    EXPECT_LE(oracle::fd_check(*t, loss, oracle::all_entries(t->size())), 1e-3);
  }
}

TEST(Tensor, DetachCutsGraph) {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor y = (x * x).detach();
  EXPECT_FALSE(y.requires_grad());
  EXPECT_EQ(y.item(), 4.0);
}

}  // namespace

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


#include <benchmark/benchmark.h>

#include <random>

#include "rba/detector/detector.hpp"
#include "rba/evalbench/metrics.hpp"
#include "rba/gradcore/ops.hpp"
#include "rba/workbench/synth.hpp"

namespace {

using namespace rba;

grad::Tensor random_tensor(grad::Shape shape, std::uint64_t seed, bool requires_grad = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  std::size_t count = 1;
  for (auto d : shape) count *= static_cast<std::size_t>(d);
  std::vector<double> v(count);
  for (double& x : v) x = n(rng);
  return grad::Tensor::from(shape, std::move(v), requires_grad);
}

void BM_Conv2d(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), side = static_cast<int>(state.range(1));
  const auto x = random_tensor({c, side, side}, 1);
  const auto k = random_tensor({2 * c, c, 3, 3}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(grad::conv2d(x, k, 1, 1).data().data());
  state.SetItemsProcessed(state.iterations() * 2 * c * side * side * c * 9);
}
BENCHMARK(BM_Conv2d)->Args({8, 64})->Args({16, 32})->Args({32, 16});

void BM_DetectorForward(benchmark::State& state) {
  const auto params = det::DetectorParams::init({}, 3);
  const Image img = synth::generate({}, 1, 4)[0].image;
  for (auto _ : state) benchmark::DoNotOptimize(det::forward(params, img).head.data().data());
}
BENCHMARK(BM_DetectorForward);

void BM_DetectorTrainStep(benchmark::State& state) {
  auto params = det::DetectorParams::init({}, 3);
  const Sample s = synth::generate({}, 1, 4)[0];
  for (auto _ : state) {
    params.zero_grad();
    const auto out = det::forward(params, s.image);
    grad::backward(det::detection_loss(out.head, s.anns, params.config).total);
  }
}
BENCHMARK(BM_DetectorTrainStep);

std::vector<det::Detection> random_dets(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1), s(0.05, 0.3);
  std::vector<det::Detection> out;
  for (int i = 0; i < n; ++i) out.push_back({static_cast<int>(rng() % 4), u(rng), {u(rng), u(rng), s(rng), s(rng)}, i});
  return out;
}

void BM_Nms(benchmark::State& state) {
  const auto dets = random_dets(static_cast<int>(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(det::nms(dets, 0.45).size());
}
BENCHMARK(BM_Nms)->Arg(64)->Arg(512);

void BM_AveragePrecision(benchmark::State& state) {
  const int images = static_cast<int>(state.range(0));
  const Dataset d = synth::generate({}, images, 6);
  std::vector<eval::GtList> gts;
  std::vector<eval::DetList> dets;
  for (int i = 0; i < images; ++i) {
    gts.push_back(d[i].anns);
    dets.push_back(random_dets(20, 100 + i));
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::average_precision(dets, gts, 0, 0.5));
}
BENCHMARK(BM_AveragePrecision)->Arg(100)->Arg(400);

}  // namespace

BENCHMARK_MAIN();

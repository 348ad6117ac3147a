/*
 * Copyright 2026 The ulfenc Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// OpenMP kernels against their serial references.
//
//   ./build/bench/bench_kernels --benchmark_filter=Blur
//
// Set OMP_NUM_THREADS to compare thread counts.

#include <cmath>
#include <random>

#include <benchmark/benchmark.h>

#include "ulfenc/kernels.hpp"
#include "ulfenc/metrics.hpp"

namespace {

using namespace ulfenc;

Volume3D random_volume(int64_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Volume3D v({n, n, n});
  for (auto& x : v.data()) x = u(rng);
  return v;
}

kernels::SamplingGrid rotated_grid(int64_t n) {
  kernels::SamplingGrid g = kernels::identity_grid({n, n, n});
  const double c = std::cos(0.15), s = std::sin(0.15), mid = (n - 1) / 2.0;
  for (size_t i = 0; i < g.x.size(); ++i) {
    const double y = g.y[i] - mid, x = g.x[i] - mid;
    g.y[i] = c * y - s * x + mid + 0.3;
    g.x[i] = s * y + c * x + mid - 0.2;
  }
  return g;
}

template <bool kReference>
void BM_BoxMean(benchmark::State& state) {
  const int64_t n = state.range(0);
  const Volume3D v = random_volume(n, 1);
  const std::vector<double> in(v.data().begin(), v.data().end());
  for (auto _ : state) {
    auto out = kReference ? kernels::reference::box_mean_valid(in, v.shape(), {11, 11, 11})
                          : kernels::box_mean_valid(in, v.shape(), {11, 11, 11});
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * v.size());
}

template <bool kReference>
void BM_Blur(benchmark::State& state) {
  const Volume3D v = random_volume(state.range(0), 2);
  for (auto _ : state) {
    auto out = kReference ? kernels::reference::gaussian_blur(v, {1.5, 1.0, 0.5})
                          : kernels::gaussian_blur(v, {1.5, 1.0, 0.5});
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * v.size());
}

template <bool kReference>
void BM_Trilinear(benchmark::State& state) {
  const Volume3D v = random_volume(state.range(0), 3);
  const auto grid = rotated_grid(state.range(0));
  for (auto _ : state) {
    auto out = kReference ? kernels::reference::sample_trilinear(v, grid) : kernels::sample_trilinear(v, grid);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * v.size());
}

template <bool kReference>
void BM_Nearest(benchmark::State& state) {
  const Volume3D v = random_volume(state.range(0), 4);
  const auto grid = rotated_grid(state.range(0));
  for (auto _ : state) {
    auto out = kReference ? kernels::reference::sample_nearest(v, grid) : kernels::sample_nearest(v, grid);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * v.size());
}

void BM_Ssim3d(benchmark::State& state) {
  const Volume3D x = random_volume(state.range(0), 5);
  const Volume3D y = random_volume(state.range(0), 6);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim3d(x, y));
  state.SetItemsProcessed(state.iterations() * x.size());
}

BENCHMARK(BM_BoxMean<false>)->Name("BoxMean/omp")->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BoxMean<true>)->Name("BoxMean/reference")->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Blur<false>)->Name("Blur/omp")->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Blur<true>)->Name("Blur/reference")->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Trilinear<false>)->Name("Trilinear/omp")->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Trilinear<true>)->Name("Trilinear/reference")->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Nearest<false>)->Name("Nearest/omp")->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Nearest<true>)->Name("Nearest/reference")->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Ssim3d)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

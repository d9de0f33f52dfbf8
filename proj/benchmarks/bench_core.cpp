// Copyright 2026 The cohdiff Authors.
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

#include "cohdiff/attention.hpp"
#include "cohdiff/nn_ops.hpp"
#include "cohdiff/ops.hpp"
#include "cohdiff/rng.hpp"

namespace {

using cohdiff::Padding;
using cohdiff::Rng;
using cohdiff::Shape;
using cohdiff::Tensor;

template <class S>
Tensor<S> randn(Rng& rng, Shape shape) {
  Tensor<S> t(std::move(shape));
  rng.fill_normal(t.mutable_data(), t.numel());
  return t;
}

void BM_MatmulF32(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  auto a = randn<float>(rng, {n, n});
  auto b = randn<float>(rng, {n, n});
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(BM_MatmulF32)->Arg(64)->Arg(256)->Arg(1024);

void BM_Conv2dF32(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Rng rng(1);
  auto x = randn<float>(rng, {c, 32, 32});
  auto w = randn<float>(rng, {c, c, 3, 3});
  auto b = randn<float>(rng, {c});
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, Padding::kSame));
  state.SetItemsProcessed(state.iterations() * 2LL * c * c * 9 * 32 * 32);
}
BENCHMARK(BM_Conv2dF32)->Arg(32)->Arg(64);

void BM_SoftmaxRows(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  auto x = randn<float>(rng, {n, n});
  for (auto _ : state) benchmark::DoNotOptimize(softmax(x, -1));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n) * n);
}
BENCHMARK(BM_SoftmaxRows)->Arg(256)->Arg(1024);

void BM_SelfSimilarity(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Rng rng(1);
  auto x = randn<float>(rng, {c, 16, 16});
  for (auto _ : state) benchmark::DoNotOptimize(self_similarity(x, 3));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(c) * 16 * 16 * 9);
}
BENCHMARK(BM_SelfSimilarity)->Arg(32)->Arg(64);

void BM_ScaledAttention(benchmark::State& state) {
  Rng rng(1);
  const int n = static_cast<int>(state.range(0));
  auto q = randn<float>(rng, {n, 32});
  auto k = randn<float>(rng, {8, 32});
  auto v = randn<float>(rng, {8, 32});
  auto w = randn<float>(rng, {32, 64});
  for (auto _ : state) benchmark::DoNotOptimize(scaled_attention(q, k, v, w));
}
BENCHMARK(BM_ScaledAttention)->Arg(256)->Arg(1024);

}  // namespace

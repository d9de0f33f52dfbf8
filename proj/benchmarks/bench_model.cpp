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

#include "cohdiff/gsf.hpp"
#include "cohdiff/scene.hpp"
#include "cohdiff/trainer.hpp"
#include "cohdiff/unet.hpp"

namespace {

using namespace cohdiff;

struct Fixture {
  DenoiserModel<float> model{ModelConfig{}, 1};
  Scene scene = gen_scene(7, SceneSpec{}, 32);
  Tensor<float> z{{3, 32, 32}};
  Tensor<float> eps{{3, 32, 32}};
  Schedule sched = model.schedule();

  Fixture() {
    Rng rng(2);
    rng.fill_normal(z.mutable_data(), z.numel());
    rng.fill_normal(eps.mutable_data(), eps.numel());
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_PredictEpsForward(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        f.model.predict_eps(f.z, 100, f.scene.layout, f.scene.grounded_ids, f.scene.caption_ids,
                            nullptr));
}
BENCHMARK(BM_PredictEpsForward)->Unit(benchmark::kMillisecond);

void BM_TrainStepForwardBackward(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) {
    Tape<float> tape;
    Tensor<float> loss = f.model.loss(f.z, f.scene.layout, f.scene.grounded_ids,
                                      f.scene.caption_ids, 100, f.eps, f.sched, &tape);
    benchmark::DoNotOptimize(tape.backward_collect(loss));
  }
}
BENCHMARK(BM_TrainStepForwardBackward)->Unit(benchmark::kMillisecond);

void BM_GsfForward(benchmark::State& state) {
  auto& f = fixture();
  Tensor<float> y_e = f.model.embed_tokens(f.scene.caption_ids, nullptr);
  for (auto _ : state)
    benchmark::DoNotOptimize(gsf_forward(f.z, f.scene.layout, y_e, f.model.gsf(), (Tape<float>*)nullptr));
}
BENCHMARK(BM_GsfForward)->Unit(benchmark::kMillisecond);

void BM_SampleStep(benchmark::State& state) {
  auto& f = fixture();
  GuidanceConfig g;
  g.scale = 2.0;
  Schedule tiny = make_schedule(1, 1e-4, 1e-4);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        f.model.sample(f.scene.layout, f.scene.grounded_ids, f.scene.caption_ids, g, 3));
}
BENCHMARK(BM_SampleStep)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

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

#ifndef COHDIFF_TRAINER_HPP_
#define COHDIFF_TRAINER_HPP_

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "cohdiff/diffusion.hpp"
#include "cohdiff/scene.hpp"
#include "cohdiff/unet.hpp"

namespace cohdiff {

struct TrainOptions {
  int64_t steps = 5000;
  int batch = 4;
  double lr = 1e-3;  // plain SGD, fixed step size
  uint64_t seed = 0;
  double uncond_drop = 0.1;  // caption dropped for the CFG null branch
  int64_t ckpt_every = 1000;
  std::string out_dir;  // empty = no checkpoints written
  int threads = 0;      // 0 = hardware concurrency
};

struct StepMetrics {
  int64_t step = 0;
  double loss = 0;
  double tanh_alpha = 0;
  double tanh_beta = 0;
};

inline std::string format_metrics_row(const StepMetrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(m.step),
                m.loss, m.tanh_alpha, m.tanh_beta);
  return buf;
}

inline constexpr const char* kMetricsHeader = "step,loss,tanh_alpha,tanh_beta\n";

/// Plain-SGD training loop over pre-generated scenes. All randomness (scene
/// choice, timestep, noise, caption drop) is drawn on the calling thread
/// from one seeded stream; batch elements evaluate on worker threads and
/// their gradients are reduced in ascending batch order, so the result is
/// independent of the thread count.
template <class S>
std::vector<StepMetrics> train(DenoiserModel<S>& model, const std::vector<Scene>& scenes,
                               const TrainOptions& opts,
                               const std::function<void(const StepMetrics&)>& on_step = {}) {
  if (scenes.empty()) throw ParameterError("train: no scenes");
  if (opts.batch < 1) throw ParameterError("train: batch must be >= 1");
  const Schedule sched = model.schedule();
  const int threads =
      opts.threads > 0 ? opts.threads : std::max(1u, std::thread::hardware_concurrency());

  // Scene images converted to the model scalar type once.
  std::vector<Tensor<S>> z0(scenes.size());
  for (size_t i = 0; i < scenes.size(); ++i) {
    const Tensor<float>& img = scenes[i].image;
    z0[i] = Tensor<S>(img.shape());
    for (int64_t j = 0; j < img.numel(); ++j)
      z0[i].mutable_data()[j] = static_cast<S>(img.data()[j]);
  }

  Rng rng(split_seed(opts.seed, 0x7261));
  std::vector<StepMetrics> history;
  history.reserve(static_cast<size_t>(opts.steps));

  const auto save_ckpt = [&](int64_t step, const std::string& name) {
    if (opts.out_dir.empty()) return;
    std::filesystem::create_directories(opts.out_dir);
    model.save(opts.out_dir + "/" + name, step);
  };

  struct Sample {
    int scene = 0;
    int t = 0;
    bool drop = false;
    Tensor<S> eps;
  };
  struct Result {
    double loss = 0;
    std::vector<typename Tape<S>::ParamGradEntry> grads;
  };

  const Shape img_shape = {model.config().image_channels, model.config().image_size,
                           model.config().image_size};

  for (int64_t step = 0; step < opts.steps; ++step) {
    std::vector<Sample> batch(static_cast<size_t>(opts.batch));
    for (auto& s : batch) {
      s.scene = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(scenes.size()) - 1));
      s.t = static_cast<int>(rng.uniform_int(0, sched.steps - 1));
      s.drop = rng.uniform() < opts.uncond_drop;
      s.eps = Tensor<S>(img_shape);
      rng.fill_normal(s.eps.mutable_data(), s.eps.numel());
    }

    std::vector<Result> results(batch.size());
    const auto run_sample = [&](size_t b) {
      const Sample& s = batch[b];
      const Scene& sc = scenes[static_cast<size_t>(s.scene)];
      Tape<S> tape;
      Tensor<S> loss =
          model.loss(z0[static_cast<size_t>(s.scene)], sc.layout, sc.grounded_ids,
                     s.drop ? std::vector<int>{} : sc.caption_ids, s.t, s.eps, sched, &tape);
      results[b].loss = static_cast<double>(loss.value());
      results[b].grads = tape.backward_collect(loss);
    };

    const int workers = std::min<int>(threads, static_cast<int>(batch.size()));
    if (workers <= 1) {
      for (size_t b = 0; b < batch.size(); ++b) run_sample(b);
    } else {
      std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w]() {
          try {
            for (size_t b = static_cast<size_t>(w); b < batch.size();
                 b += static_cast<size_t>(workers))
              run_sample(b);
          } catch (...) {
            errors[static_cast<size_t>(w)] = std::current_exception();
          }
        });
      for (auto& th : pool) th.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }

    // Fixed-order reduction, then the SGD step.
    model.params().zero_grad();
    const S inv_batch = S(1) / static_cast<S>(opts.batch);
    double loss_sum = 0;
    for (size_t b = 0; b < results.size(); ++b) {
      loss_sum += results[b].loss;
      for (auto& entry : results[b].grads)
        for (size_t i = 0; i < entry.grad.size(); ++i)
          entry.param->grad[i] += entry.grad[i] * inv_batch;
    }
    const double loss = loss_sum / static_cast<double>(opts.batch);
    if (!std::isfinite(loss))
      throw TrainingError("train: non-finite loss at step " + std::to_string(step));
    model.params().sgd_step(static_cast<S>(opts.lr));

    StepMetrics m;
    m.step = step;
    m.loss = loss;
    m.tanh_alpha = std::tanh(model.alpha_value());
    m.tanh_beta = model.mean_tanh_beta();
    history.push_back(m);
    if (on_step) on_step(m);

    if (opts.ckpt_every > 0 && (step + 1) % opts.ckpt_every == 0 && step + 1 < opts.steps) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint-%06lld.ckpt", static_cast<long long>(step + 1));
      save_ckpt(step + 1, name);
    }
  }

  save_ckpt(opts.steps, "checkpoint.ckpt");
  return history;
}

}  // namespace cohdiff

#endif  // COHDIFF_TRAINER_HPP_

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

#ifndef COHDIFF_DIFFUSION_HPP_
#define COHDIFF_DIFFUSION_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cohdiff/errors.hpp"
#include "cohdiff/ops.hpp"
#include "cohdiff/rng.hpp"
#include "cohdiff/tensor.hpp"

namespace cohdiff {

/// Linear-beta noise schedule with cached cumulative products.
struct Schedule {
  int steps = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
};

inline Schedule make_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ParameterError("make_schedule: step count must be >= 1");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
    throw ParameterError("make_schedule: requires 0 < beta_start <= beta_end < 1");
  Schedule s;
  s.steps = steps;
  s.betas.resize(static_cast<size_t>(steps));
  s.alphas.resize(static_cast<size_t>(steps));
  s.alpha_bars.resize(static_cast<size_t>(steps));
  double bar = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double b = steps == 1 ? beta_start
                                : beta_start + (beta_end - beta_start) * t / (steps - 1.0);
    s.betas[static_cast<size_t>(t)] = b;
    s.alphas[static_cast<size_t>(t)] = 1.0 - b;
    bar *= 1.0 - b;
    s.alpha_bars[static_cast<size_t>(t)] = bar;
  }
  return s;
}

/// Forward noising: sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
template <class S>
Tensor<S> q_sample(const Tensor<S>& z0, int t, const Tensor<S>& eps, const Schedule& sched) {
  check_same_shape(z0, eps, "q_sample");
  if (t < 0 || t >= sched.steps) throw ParameterError("q_sample: step out of range");
  const double abar = sched.alpha_bars[static_cast<size_t>(t)];
  return add(scale(z0, static_cast<S>(std::sqrt(abar))),
             scale(eps, static_cast<S>(std::sqrt(1.0 - abar))));
}

struct GuidanceConfig {
  double scale = 2.0;
  double uncond_drop_prob = 0.1;

  void validate() const {
    if (scale < 0.0) throw ParameterError("GuidanceConfig: scale must be >= 0");
    if (uncond_drop_prob < 0.0 || uncond_drop_prob >= 1.0)
      throw ParameterError("GuidanceConfig: uncond_drop_prob must be in [0, 1)");
  }
};

/// eps_uncond + scale * (eps_cond - eps_uncond). The scale-0 and scale-1
/// anchors return the corresponding operand exactly (no float round-trip).
template <class S>
Tensor<S> cfg_epsilon(const Tensor<S>& eps_cond, const Tensor<S>& eps_uncond, double scale) {
  check_same_shape(eps_cond, eps_uncond, "cfg_epsilon");
  if (scale == 0.0) return eps_uncond;
  if (scale == 1.0) return eps_cond;
  return add_scaled(eps_uncond, sub(eps_cond, eps_uncond), Tensor<S>::scalar(static_cast<S>(scale)));
}

/// Training objective: MSE between the true noise and the model prediction
/// on the noised input. `eps_model(z_t, t)` carries its conditioning in the
/// closure.
template <class S, class EpsFn>
Tensor<S> denoise_loss(EpsFn&& eps_model, const Tensor<S>& z0, int t, const Tensor<S>& eps,
                       const Schedule& sched) {
  Tensor<S> z_t = q_sample(z0, t, eps, sched);
  Tensor<S> pred = eps_model(z_t, t);
  if (!pred.all_finite()) throw TrainingError("denoise_loss: non-finite prediction");
  return mse(pred, eps);
}

/// Ancestral reverse loop from seeded Gaussian noise. `eps_fn(z, t, cond)`
/// returns the noise estimate with (cond=true) or without (cond=false) the
/// caption conditioning; at guidance scale 0 or 1 only the needed branch is
/// evaluated. The RNG stream (initial noise plus one perturbation per step
/// above zero) is a pure function of the seed, so equal flags give equal
/// trajectories. `deterministic` suppresses the per-step noise.
template <class S, class EpsFn>
Tensor<S> sample_loop(EpsFn&& eps_fn, const Shape& shape, const Schedule& sched,
                      const GuidanceConfig& guidance, uint64_t seed, bool deterministic = false) {
  guidance.validate();
  Rng rng(seed);
  Tensor<S> z(shape);
  rng.fill_normal(z.mutable_data(), z.numel());

  Tensor<S> noise(shape);
  for (int t = sched.steps - 1; t >= 0; --t) {
    Tensor<S> eps;
    if (guidance.scale == 0.0) {
      eps = eps_fn(z, t, false);
    } else if (guidance.scale == 1.0) {
      eps = eps_fn(z, t, true);
    } else {
      Tensor<S> eps_c = eps_fn(z, t, true);
      Tensor<S> eps_u = eps_fn(z, t, false);
      eps = cfg_epsilon(eps_c, eps_u, guidance.scale);
    }
    const double alpha = sched.alphas[static_cast<size_t>(t)];
    const double abar = sched.alpha_bars[static_cast<size_t>(t)];
    const double eps_coef = sched.betas[static_cast<size_t>(t)] / std::sqrt(1.0 - abar);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);

    Tensor<S> mean = scale(add_scaled(z, eps, Tensor<S>::scalar(static_cast<S>(-eps_coef))),
                           static_cast<S>(inv_sqrt_alpha));
    if (t > 0) {
      const double abar_prev = sched.alpha_bars[static_cast<size_t>(t - 1)];
      const double var = (1.0 - abar_prev) / (1.0 - abar) * sched.betas[static_cast<size_t>(t)];
      if (!deterministic) {
        rng.fill_normal(noise.mutable_data(), noise.numel());
        z = add_scaled(mean, noise, Tensor<S>::scalar(static_cast<S>(std::sqrt(var))));
      } else {
        z = mean;
      }
    } else {
      z = mean;
    }
    if (!z.all_finite())
      throw SamplingError("sample_loop: non-finite state at step " + std::to_string(t));
  }
  return z;
}

}  // namespace cohdiff

#endif  // COHDIFF_DIFFUSION_HPP_

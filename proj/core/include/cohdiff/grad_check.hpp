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

#ifndef COHDIFF_GRAD_CHECK_HPP_
#define COHDIFF_GRAD_CHECK_HPP_

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cohdiff/tape.hpp"
#include "cohdiff/tensor.hpp"

namespace cohdiff {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central-finite-difference check of reverse-mode gradients, 64-bit only.
/// `loss_fn` must rebuild the forward pass from current parameter values;
/// it receives a tape for the analytic pass and nullptr for plain
/// evaluations. Error metric per element: |analytic - numeric| / max(1, |numeric|).
inline GradCheckResult grad_check_full(const std::function<Tensor<double>(Tape<double>*)>& loss_fn,
                                       ParamStore<double>& params, double step = 1e-5) {
  params.zero_grad();
  {
    Tape<double> tape;
    Tensor<double> loss = loss_fn(&tape);
    if (!loss.all_finite()) throw EvaluationError("grad_check: non-finite loss");
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic(params.size());
  for (size_t i = 0; i < params.size(); ++i) analytic[i] = params[i].grad;

  GradCheckResult res;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<double>& p = params[pi];
    double* v = p.value.mutable_data();
    for (int64_t i = 0; i < p.value.numel(); ++i) {
      const double saved = v[i];
      v[i] = saved + step;
      const double up = loss_fn(nullptr).value();
      v[i] = saved - step;
      const double down = loss_fn(nullptr).value();
      v[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw EvaluationError("grad_check: non-finite loss at " + p.name);
      const double numeric = (up - down) / (2.0 * step);
      const double rel = std::abs(analytic[pi][static_cast<size_t>(i)] - numeric) /
                         std::max(1.0, std::abs(numeric));
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = p.name;
        res.worst_index = i;
        res.analytic = analytic[pi][static_cast<size_t>(i)];
        res.numeric = numeric;
      }
    }
  }
  return res;
}

inline double grad_check(const std::function<Tensor<double>(Tape<double>*)>& loss_fn,
                         ParamStore<double>& params, double step = 1e-5) {
  return grad_check_full(loss_fn, params, step).max_rel_error;
}

}  // namespace cohdiff

#endif  // COHDIFF_GRAD_CHECK_HPP_

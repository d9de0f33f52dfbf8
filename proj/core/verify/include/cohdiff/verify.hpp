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

#ifndef COHDIFF_VERIFY_HPP_
#define COHDIFF_VERIFY_HPP_

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cohdiff/tensor.hpp"

namespace cohdiff::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;  // on failure: counterexample description
  uint64_t seed = 0;   // seed reproducing the failing case
};

/// Candidate override for fault-injection tests: a drop-in for the softmax
/// used inside the oracle equivalence checks.
using SoftmaxFn = std::function<Tensor<double>(const Tensor<double>&, int)>;

/// Randomized equivalence against the brute-force oracles. Case counts and
/// tolerances: self-similarity 100 cases at 1e-12; matmul/softmax/conv and
/// the attention-path ops 50 cases each at 1e-10 (1e-12 where noted).
std::vector<CheckResult> oracle_suite(uint64_t seed);
std::vector<CheckResult> oracle_suite_with(uint64_t seed, const SoftmaxFn& softmax_candidate);

/// Central-finite-difference checks (64-bit, step 1e-5, threshold 1e-4) for
/// every differentiable building block up to the full 8x8 debug model.
std::vector<CheckResult> grad_suite(uint64_t seed);

/// Exactness and distributional invariants: rectification zero-mass, gate
/// identities, CFG anchors, schedule shape, forward determinism, and the
/// q_sample variance law.
std::vector<CheckResult> property_suite(uint64_t seed);

/// suite in {"oracles", "grads", "properties", "all"}.
std::vector<CheckResult> run_suite(const std::string& suite, uint64_t seed);

bool all_pass(const std::vector<CheckResult>& results);
nlohmann::json report_json(const std::string& suite, uint64_t seed,
                           const std::vector<CheckResult>& results);

}  // namespace cohdiff::verify

#endif  // COHDIFF_VERIFY_HPP_

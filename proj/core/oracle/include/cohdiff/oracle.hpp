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
//
// Brute-force reference implementations used by tests and the verification
// suites. Everything here is deliberately written as plain nested loops in
// 64-bit, with no code shared with the optimized paths in cohdiff_core
// (only the Tensor/LayoutMap carriers are common).

#ifndef COHDIFF_ORACLE_HPP_
#define COHDIFF_ORACLE_HPP_

#include <cstdint>
#include <vector>

#include "cohdiff/layout.hpp"
#include "cohdiff/tensor.hpp"

namespace cohdiff::oracle {

using DTensor = Tensor<double>;

/// Triple-loop matrix product.
DTensor matmul_oracle(const DTensor& a, const DTensor& b);

/// Direct exp-normalize over the last axis of a 2-D tensor.
DTensor softmax_oracle(const DTensor& x);

/// Six-loop convolution, cross-correlation convention, "same" or valid
/// padding to mirror the optimized contract.
DTensor conv_oracle(const DTensor& x, const DTensor& w, const DTensor& bias, bool same_padding);

/// Literal padded-feature self-similarity: materializes the zero-padded map,
/// flattens each k x k neighborhood, then sums channel products.
DTensor ss_oracle(const DTensor& q_r, int k);

/// Direct attention: logits q.k/sqrt(C), exp-normalize, weight v. When
/// `allowed` is non-null (row-major [N_q, N_k]), masked weights are zeroed
/// and each row renormalized over the survivors. No output projection.
DTensor attn_oracle(const DTensor& q, const DTensor& k, const DTensor& v,
                    const std::vector<uint8_t>* allowed = nullptr);

/// Per-pixel floor-scaling nearest resize.
LayoutMap resize_oracle(const LayoutMap& m, int out_h, int out_w);

/// Scalar recursion for the deterministic reverse loop with a zero noise
/// prediction: returns prod_t 1/sqrt(alpha_t).
double zero_eps_trajectory_scale(const std::vector<double>& alphas);

}  // namespace cohdiff::oracle

#endif  // COHDIFF_ORACLE_HPP_

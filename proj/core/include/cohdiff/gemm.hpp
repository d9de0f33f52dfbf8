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

#ifndef COHDIFF_GEMM_HPP_
#define COHDIFF_GEMM_HPP_

#include <cstdint>

namespace cohdiff {

// C(MxN) += A(MxK) * B(KxN), all row-major contiguous. The k-loop is the
// outer accumulation loop so each C entry is summed in ascending-k order;
// that order is part of the numeric contract (bit-reproducible runs). The
// contiguous j-loop vectorizes well without reassociating any sums.
template <class S>
void gemm_nn(int m, int n, int k, const S* a, const S* b, S* c) {
  if (n <= 8) {
    // Skinny output: accumulate the whole row in registers to break the
    // store-to-load chain. Summation order (ascending k) is unchanged.
    for (int i = 0; i < m; ++i) {
      const S* arow = a + static_cast<int64_t>(i) * k;
      S acc[8] = {};
      for (int p = 0; p < k; ++p) {
        const S av = arow[p];
        const S* brow = b + static_cast<int64_t>(p) * n;
        for (int j = 0; j < n; ++j) acc[j] += av * brow[j];
      }
      S* crow = c + static_cast<int64_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += acc[j];
    }
    return;
  }
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<int64_t>(i) * k;
    S* crow = c + static_cast<int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const S av = arow[p];
      const S* brow = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(MxN) += A(MxK) * B(NxK)^T. Each entry is a dot product over ascending k,
// the same accumulation order as gemm_nn on a transposed copy.
template <class S>
void gemm_nt(int m, int n, int k, const S* a, const S* b, S* c) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<int64_t>(i) * k;
    S* crow = c + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const S* brow = b + static_cast<int64_t>(j) * k;
      S acc = S(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C(MxN) += A(KxM)^T * B(KxN).
template <class S>
void gemm_tn(int m, int n, int k, const S* a, const S* b, S* c) {
  for (int p = 0; p < k; ++p) {
    const S* arow = a + static_cast<int64_t>(p) * m;
    const S* brow = b + static_cast<int64_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const S av = arow[i];
      S* crow = c + static_cast<int64_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class S>
void transpose_copy(int rows, int cols, const S* src, S* dst) {
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) dst[static_cast<int64_t>(j) * rows + i] = src[static_cast<int64_t>(i) * cols + j];
}

}  // namespace cohdiff

#endif  // COHDIFF_GEMM_HPP_

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

#ifndef COHDIFF_NN_OPS_HPP_
#define COHDIFF_NN_OPS_HPP_

#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "cohdiff/ops.hpp"

namespace cohdiff {

enum class Padding { kSame, kValid };

namespace detail {

template <class S>
void im2col(const S* x, int cin, int h, int w, int kh, int kw, int ph, int pw, int ho, int wo,
            S* cols) {
  // cols is [cin*kh*kw, ho*wo] row-major.
  const int64_t p = static_cast<int64_t>(ho) * wo;
  for (int c = 0; c < cin; ++c)
    for (int ki = 0; ki < kh; ++ki)
      for (int kj = 0; kj < kw; ++kj) {
        S* row = cols + ((static_cast<int64_t>(c) * kh + ki) * kw + kj) * p;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy + ki - ph;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox + kj - pw;
            row[static_cast<int64_t>(oy) * wo + ox] =
                (iy >= 0 && iy < h && ix >= 0 && ix < w)
                    ? x[(static_cast<int64_t>(c) * h + iy) * w + ix]
                    : S(0);
          }
        }
      }
}

template <class S>
void col2im_acc(const S* cols, int cin, int h, int w, int kh, int kw, int ph, int pw, int ho,
                int wo, S* gx) {
  const int64_t p = static_cast<int64_t>(ho) * wo;
  for (int c = 0; c < cin; ++c)
    for (int ki = 0; ki < kh; ++ki)
      for (int kj = 0; kj < kw; ++kj) {
        const S* row = cols + ((static_cast<int64_t>(c) * kh + ki) * kw + kj) * p;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy + ki - ph;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox + kj - pw;
            if (ix < 0 || ix >= w) continue;
            gx[(static_cast<int64_t>(c) * h + iy) * w + ix] += row[static_cast<int64_t>(oy) * wo + ox];
          }
        }
      }
}

}  // namespace detail

/// 2-D convolution in the cross-correlation convention (no kernel flip).
/// x: [Cin,H,W], w: [Cout,Cin,kh,kw], bias: [Cout]. Odd kernel extents only;
/// "same" padding preserves the spatial size.
template <class S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias,
                 Padding padding = Padding::kSame) {
  if (x.ndim() != 3 || w.ndim() != 4) throw DimensionError("conv2d: expects x[C,H,W], w[Co,Ci,kh,kw]");
  const int cin = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin)
    throw DimensionError("conv2d: weight in-channels " + std::to_string(w.dim(1)) +
                         " do not match input channels " + std::to_string(cin));
  if (kh % 2 == 0 || kw % 2 == 0) throw ParameterError("conv2d: kernel extents must be odd");
  if (bias.ndim() != 1 || bias.dim(0) != cout)
    throw DimensionError("conv2d: bias extent must equal out-channels");
  const int ph = padding == Padding::kSame ? (kh - 1) / 2 : 0;
  const int pw = padding == Padding::kSame ? (kw - 1) / 2 : 0;
  const int ho = padding == Padding::kSame ? h : h - kh + 1;
  const int wo = padding == Padding::kSame ? ww : ww - kw + 1;
  if (ho <= 0 || wo <= 0) throw DimensionError("conv2d: kernel larger than input under valid padding");

  const int k2 = cin * kh * kw;
  const int64_t p = static_cast<int64_t>(ho) * wo;
  auto cols = std::make_shared<std::vector<S>>(static_cast<size_t>(k2) * p);
  detail::im2col(x.data(), cin, h, ww, kh, kw, ph, pw, ho, wo, cols->data());

  Tensor<S> out({cout, ho, wo});
  gemm_nn(cout, static_cast<int>(p), k2, w.data(), cols->data(), out.mutable_data());
  S* py = out.mutable_data();
  const S* pb = bias.data();
  for (int co = 0; co < cout; ++co)
    for (int64_t i = 0; i < p; ++i) py[co * p + i] += pb[co];

  Tape<S>* tp = detail::merge_tapes(detail::tape_of(x, w), bias.tape());
  if (tp) {
    const int nx = x.node(), nw = w.node(), nb = bias.node();
    auto wdata = w.storage();
    tp->emit(out, [=](Tape<S>& t, const S* g) {
      if (nb >= 0) {
        auto& gb = t.grad(nb);
        for (int co = 0; co < cout; ++co) {
          S acc = S(0);
          for (int64_t i = 0; i < p; ++i) acc += g[co * p + i];
          gb[static_cast<size_t>(co)] += acc;
        }
      }
      if (nw >= 0) {
        std::vector<S> dw(static_cast<size_t>(cout) * k2, S(0));
        gemm_nt(cout, k2, static_cast<int>(p), g, cols->data(), dw.data());  // dW = G * cols^T
        detail::accumulate(t, nw, dw.data(), static_cast<int64_t>(dw.size()));
      }
      if (nx >= 0) {
        // dcols = W^T * G, then scatter back through the patches.
        std::vector<S> dcols(static_cast<size_t>(k2) * p, S(0));
        gemm_tn(k2, static_cast<int>(p), cout, wdata->data(), g, dcols.data());
        auto& gx = t.grad(nx);
        detail::col2im_acc(dcols.data(), cin, h, ww, kh, kw, ph, pw, ho, wo, gx.data());
      }
    });
  }
  return out;
}

/// Per-pixel dot products against the zero-padded k x k neighborhood.
/// x: [C,H,W] -> out: [k*k,H,W]. Window offsets are enumerated row-major, so
/// channel c of the output corresponds to neighbor (c/k - t, c%k - t) with
/// t = (k-1)/2. Neighbors landing in the padding contribute exactly zero.
template <class S>
Tensor<S> self_similarity(const Tensor<S>& x, int k) {
  if (x.ndim() != 3) throw DimensionError("self_similarity: expects [C,H,W]");
  if (k < 1 || k % 2 == 0) throw ParameterError("self_similarity: window length must be odd and >= 1");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (k > 2 * std::min(h, w) + 1)
    throw ParameterError("self_similarity: window length exceeds 2*min(H,W)+1");
  const int t = (k - 1) / 2;
  Tensor<S> out({k * k, h, w});
  const S* px = x.data();
  S* py = out.mutable_data();
  const int64_t hw = static_cast<int64_t>(h) * w;
  for (int wi = 0; wi < k * k; ++wi) {
    const int di = wi / k - t, dj = wi % k - t;
    for (int i = 0; i < h; ++i) {
      const int ni = i + di;
      for (int j = 0; j < w; ++j) {
        const int nj = j + dj;
        S acc = S(0);
        if (ni >= 0 && ni < h && nj >= 0 && nj < w) {
          for (int ch = 0; ch < c; ++ch)
            acc += px[ch * hw + static_cast<int64_t>(i) * w + j] * px[ch * hw + static_cast<int64_t>(ni) * w + nj];
        }
        py[static_cast<int64_t>(wi) * hw + static_cast<int64_t>(i) * w + j] = acc;
      }
    }
  }
  if (Tape<S>* tp = detail::tape_of(x)) {
    const int nx = x.node();
    auto xs = x.storage();
    tp->emit(out, [nx, xs, c, h, w, k, t, hw](Tape<S>& tape, const S* g) {
      if (nx < 0) return;
      auto& gx = tape.grad(nx);
      const S* px = xs->data();
      for (int wi = 0; wi < k * k; ++wi) {
        const int di = wi / k - t, dj = wi % k - t;
        for (int i = 0; i < h; ++i) {
          const int ni = i + di;
          if (ni < 0 || ni >= h) continue;
          for (int j = 0; j < w; ++j) {
            const int nj = j + dj;
            if (nj < 0 || nj >= w) continue;
            const S gv = g[static_cast<int64_t>(wi) * hw + static_cast<int64_t>(i) * w + j];
            if (gv == S(0)) continue;
            for (int ch = 0; ch < c; ++ch) {
              const int64_t center = ch * hw + static_cast<int64_t>(i) * w + j;
              const int64_t nb = ch * hw + static_cast<int64_t>(ni) * w + nj;
              gx[static_cast<size_t>(center)] += gv * px[nb];
              gx[static_cast<size_t>(nb)] += gv * px[center];
            }
          }
        }
      }
    });
  }
  return out;
}

/// Sets disallowed logits to -inf ahead of a softmax. `allowed` is a row-major
/// [R,C] boolean matrix; every row must keep at least one entry.
template <class S>
Tensor<S> mask_logits(const Tensor<S>& x, const std::vector<uint8_t>& allowed) {
  if (x.ndim() != 2) throw DimensionError("mask_logits: expects 2-D logits");
  const int r = x.dim(0), c = x.dim(1);
  if (static_cast<int64_t>(allowed.size()) != static_cast<int64_t>(r) * c)
    throw DimensionError("mask_logits: mask size mismatch");
  Tensor<S> out(x.shape());
  const S* px = x.data();
  S* py = out.mutable_data();
  const S neg_inf = -std::numeric_limits<S>::infinity();
  for (int i = 0; i < r; ++i) {
    bool any = false;
    for (int j = 0; j < c; ++j) {
      const int64_t idx = static_cast<int64_t>(i) * c + j;
      if (allowed[static_cast<size_t>(idx)]) {
        py[idx] = px[idx];
        any = true;
      } else {
        py[idx] = neg_inf;
      }
    }
    if (!any) throw RectificationError("mask_logits: row " + std::to_string(i) + " allows no token");
  }
  if (Tape<S>* tp = detail::tape_of(x)) {
    const int nx = x.node();
    auto mask = std::make_shared<std::vector<uint8_t>>(allowed);
    tp->emit(out, [nx, mask, r, c](Tape<S>& t, const S* g) {
      if (nx < 0) return;
      auto& gx = t.grad(nx);
      for (int64_t i = 0; i < static_cast<int64_t>(r) * c; ++i)
        if ((*mask)[static_cast<size_t>(i)]) gx[static_cast<size_t>(i)] += g[i];
    });
  }
  return out;
}

}  // namespace cohdiff

#endif  // COHDIFF_NN_OPS_HPP_

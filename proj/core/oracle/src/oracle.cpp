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

#include "cohdiff/oracle.hpp"

#include <cmath>

#include "cohdiff/errors.hpp"

namespace cohdiff::oracle {

DTensor matmul_oracle(const DTensor& a, const DTensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul_oracle: bad shapes");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  DTensor out({m, n});
  double* po = out.mutable_data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a.data()[i * k + p] * b.data()[p * n + j];
      po[i * n + j] = acc;
    }
  return out;
}

DTensor softmax_oracle(const DTensor& x) {
  if (x.ndim() != 2) throw DimensionError("softmax_oracle: expects 2-D");
  const int r = x.dim(0), c = x.dim(1);
  DTensor out(x.shape());
  for (int i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < c; ++j) mx = std::max(mx, x.data()[i * c + j]);
    if (mx == -std::numeric_limits<double>::infinity())
      throw MaskingError("softmax_oracle: fully masked row");
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(x.data()[i * c + j] - mx);
    for (int j = 0; j < c; ++j)
      out.mutable_data()[i * c + j] = std::exp(x.data()[i * c + j] - mx) / sum;
  }
  return out;
}

DTensor conv_oracle(const DTensor& x, const DTensor& w, const DTensor& bias, bool same_padding) {
  if (x.ndim() != 3 || w.ndim() != 4 || w.dim(1) != x.dim(0))
    throw DimensionError("conv_oracle: bad shapes");
  const int cin = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int ph = same_padding ? (kh - 1) / 2 : 0;
  const int pw = same_padding ? (kw - 1) / 2 : 0;
  const int ho = same_padding ? h : h - kh + 1;
  const int wo = same_padding ? ww : ww - kw + 1;
  DTensor out({cout, ho, wo});
  double* po = out.mutable_data();
  for (int co = 0; co < cout; ++co)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        double acc = bias.numel() ? bias.data()[co] : 0.0;
        for (int ci = 0; ci < cin; ++ci)
          for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
              const int iy = oy + ki - ph;
              const int ix = ox + kj - pw;
              if (iy < 0 || iy >= h || ix < 0 || ix >= ww) continue;
              acc += x.data()[(static_cast<int64_t>(ci) * h + iy) * ww + ix] *
                     w.data()[((static_cast<int64_t>(co) * cin + ci) * kh + ki) * kw + kj];
            }
        po[(static_cast<int64_t>(co) * ho + oy) * wo + ox] = acc;
      }
  return out;
}

DTensor ss_oracle(const DTensor& q_r, int k) {
  if (q_r.ndim() != 3) throw DimensionError("ss_oracle: expects [C,H,W]");
  if (k < 1 || k % 2 == 0) throw ParameterError("ss_oracle: window length must be odd");
  const int c = q_r.dim(0), h = q_r.dim(1), w = q_r.dim(2);
  const int t = (k - 1) / 2;
  const int hp = h + k - 1, wp = w + k - 1;

  // Padded feature map, built explicitly.
  std::vector<double> padded(static_cast<size_t>(c) * hp * wp, 0.0);
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        padded[(static_cast<size_t>(ch) * hp + (i + t)) * wp + (j + t)] =
            q_r.data()[(static_cast<int64_t>(ch) * h + i) * w + j];

  DTensor out({k * k, h, w});
  double* po = out.mutable_data();
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      // Flattened k x k neighborhood of (i, j) in the padded map: O[c][t].
      std::vector<double> neigh(static_cast<size_t>(c) * k * k);
      for (int ch = 0; ch < c; ++ch) {
        int slot = 0;
        for (int di = 0; di < k; ++di)
          for (int dj = 0; dj < k; ++dj, ++slot)
            neigh[static_cast<size_t>(ch) * k * k + slot] =
                padded[(static_cast<size_t>(ch) * hp + (i + di)) * wp + (j + dj)];
      }
      for (int slot = 0; slot < k * k; ++slot) {
        double acc = 0.0;
        for (int ch = 0; ch < c; ++ch)
          acc += q_r.data()[(static_cast<int64_t>(ch) * h + i) * w + j] *
                 neigh[static_cast<size_t>(ch) * k * k + slot];
        po[(static_cast<int64_t>(slot) * h + i) * w + j] = acc;
      }
    }
  return out;
}

DTensor attn_oracle(const DTensor& q, const DTensor& k, const DTensor& v,
                    const std::vector<uint8_t>* allowed) {
  if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2 || q.dim(1) != k.dim(1) ||
      k.dim(0) != v.dim(0))
    throw DimensionError("attn_oracle: bad shapes");
  const int nq = q.dim(0), nk = k.dim(0), c = q.dim(1), cv = v.dim(1);
  if (nk == 0) throw ParameterError("attn_oracle: empty context");
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(c));
  DTensor out({nq, cv});
  for (int i = 0; i < nq; ++i) {
    std::vector<double> logits(static_cast<size_t>(nk));
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < nk; ++j) {
      double acc = 0.0;
      for (int p = 0; p < c; ++p) acc += q.data()[i * c + p] * k.data()[j * c + p];
      logits[static_cast<size_t>(j)] = acc * inv_sqrt_c;
      mx = std::max(mx, logits[static_cast<size_t>(j)]);
    }
    std::vector<double> wgt(static_cast<size_t>(nk));
    double sum = 0.0;
    for (int j = 0; j < nk; ++j) {
      wgt[static_cast<size_t>(j)] = std::exp(logits[static_cast<size_t>(j)] - mx);
      sum += wgt[static_cast<size_t>(j)];
    }
    for (int j = 0; j < nk; ++j) wgt[static_cast<size_t>(j)] /= sum;
    if (allowed) {
      double kept = 0.0;
      for (int j = 0; j < nk; ++j) {
        if (!(*allowed)[static_cast<size_t>(i) * nk + j]) wgt[static_cast<size_t>(j)] = 0.0;
        kept += wgt[static_cast<size_t>(j)];
      }
      if (kept == 0.0) throw MaskingError("attn_oracle: fully masked row");
      for (int j = 0; j < nk; ++j) wgt[static_cast<size_t>(j)] /= kept;
    }
    for (int p = 0; p < cv; ++p) {
      double acc = 0.0;
      for (int j = 0; j < nk; ++j) acc += wgt[static_cast<size_t>(j)] * v.data()[j * cv + p];
      out.mutable_data()[i * cv + p] = acc;
    }
  }
  return out;
}

LayoutMap resize_oracle(const LayoutMap& m, int out_h, int out_w) {
  LayoutMap out(out_h, out_w);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const int sy = static_cast<int>(static_cast<int64_t>(y) * m.h / out_h);
      const int sx = static_cast<int>(static_cast<int64_t>(x) * m.w / out_w);
      out.at(y, x) = m.at(sy, sx);
    }
  return out;
}

double zero_eps_trajectory_scale(const std::vector<double>& alphas) {
  double scale = 1.0;
  for (double a : alphas) scale *= 1.0 / std::sqrt(a);
  return scale;
}

}  // namespace cohdiff::oracle

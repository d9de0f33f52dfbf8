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

#ifndef COHDIFF_OPS_HPP_
#define COHDIFF_OPS_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "cohdiff/errors.hpp"
#include "cohdiff/gemm.hpp"
#include "cohdiff/tape.hpp"
#include "cohdiff/tensor.hpp"

namespace cohdiff {

namespace detail {

template <class S>
Tape<S>* merge_tapes(Tape<S>* a, Tape<S>* b) {
  if (a && b && a != b) throw ParameterError("operands belong to different tapes");
  return a ? a : b;
}

template <class S>
Tape<S>* tape_of(const Tensor<S>& a) {
  return a.tape();
}

template <class S>
Tape<S>* tape_of(const Tensor<S>& a, const Tensor<S>& b) {
  return merge_tapes(a.tape(), b.tape());
}

template <class S>
Tape<S>* tape_of(const Tensor<S>& a, const Tensor<S>& b, const Tensor<S>& c) {
  return merge_tapes(merge_tapes(a.tape(), b.tape()), c.tape());
}

template <class S>
void accumulate(Tape<S>& t, int node, const S* g, int64_t n) {
  if (node < 0) return;
  auto& buf = t.grad(node);
  for (int64_t i = 0; i < n; ++i) buf[i] += g[i];
}

// Polynomial expf (cephes-style, ~2 ulp). Softmax feeds it max-subtracted
// values, so only the x <= 0 range matters; anything below the float
// denormal range collapses to an exact zero. The 64-bit path stays on
// std::exp so the verification builds keep full precision.
inline float softmax_exp(float x) {
  if (x < -87.0f) return 0.0f;
  if (x > 88.0f) x = 88.0f;
  const float n = std::floor(x * 1.44269504088896341f + 0.5f);
  float r = x - n * 0.693359375f;
  r -= n * -2.12194440e-4f;
  const float r2 = r * r;
  float p = 1.9875691500e-4f;
  p = p * r + 1.3981999507e-3f;
  p = p * r + 8.3334519073e-3f;
  p = p * r + 4.1665795894e-2f;
  p = p * r + 1.6666665459e-1f;
  p = p * r + 5.0000001201e-1f;
  const float y = p * r2 + r + 1.0f;
  const uint32_t bits = static_cast<uint32_t>(static_cast<int32_t>(n) + 127) << 23;
  float s;
  std::memcpy(&s, &bits, sizeof(s));
  return y * s;
}

inline double softmax_exp(double x) { return std::exp(x); }

}  // namespace detail

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  check_same_shape(a, b, "add");
  Tensor<S> out(a.shape());
  const S* pa = a.data();
  const S* pb = b.data();
  S* po = out.mutable_data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  if (Tape<S>* tp = detail::tape_of(a, b)) {
    const int na = a.node(), nb = b.node();
    tp->emit(out, [na, nb, n](Tape<S>& t, const S* g) {
      detail::accumulate(t, na, g, n);
      detail::accumulate(t, nb, g, n);
    });
  }
  return out;
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  check_same_shape(a, b, "sub");
  Tensor<S> out(a.shape());
  const S* pa = a.data();
  const S* pb = b.data();
  S* po = out.mutable_data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
  if (Tape<S>* tp = detail::tape_of(a, b)) {
    const int na = a.node(), nb = b.node();
    tp->emit(out, [na, nb, n](Tape<S>& t, const S* g) {
      detail::accumulate(t, na, g, n);
      if (nb >= 0) {
        auto& gb = t.grad(nb);
        for (int64_t i = 0; i < n; ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  check_same_shape(a, b, "mul");
  Tensor<S> out(a.shape());
  const S* pa = a.data();
  const S* pb = b.data();
  S* po = out.mutable_data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
  if (Tape<S>* tp = detail::tape_of(a, b)) {
    const int na = a.node(), nb = b.node();
    auto da = a.storage();
    auto db = b.storage();
    tp->emit(out, [na, nb, n, da, db](Tape<S>& t, const S* g) {
      if (na >= 0) {
        auto& ga = t.grad(na);
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * (*db)[static_cast<size_t>(i)];
      }
      if (nb >= 0) {
        auto& gb = t.grad(nb);
        for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * (*da)[static_cast<size_t>(i)];
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, S c) {
  Tensor<S> out(a.shape());
  const S* pa = a.data();
  S* po = out.mutable_data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * c;
  if (Tape<S>* tp = detail::tape_of(a)) {
    const int na = a.node();
    tp->emit(out, [na, n, c](Tape<S>& t, const S* g) {
      if (na >= 0) {
        auto& ga = t.grad(na);
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * c;
      }
    });
  }
  return out;
}

/// out = base + gate[0] * other, with `gate` a 1-element tensor. This is the
/// shared kernel behind tanh-gated injection and SFE fusion.
template <class S>
Tensor<S> add_scaled(const Tensor<S>& base, const Tensor<S>& other, const Tensor<S>& gate) {
  check_same_shape(base, other, "add_scaled");
  if (gate.numel() != 1) throw DimensionError("add_scaled: gate must be a 1-element tensor");
  const S s = gate.data()[0];
  Tensor<S> out(base.shape());
  const S* pb = base.data();
  const S* po_in = other.data();
  S* po = out.mutable_data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pb[i] + s * po_in[i];
  Tape<S>* tp = detail::merge_tapes(detail::tape_of(base, other), gate.tape());
  if (tp) {
    const int nb = base.node(), no = other.node(), ng = gate.node();
    auto dother = other.storage();
    tp->emit(out, [nb, no, ng, n, s, dother](Tape<S>& t, const S* g) {
      detail::accumulate(t, nb, g, n);
      if (no >= 0) {
        auto& go = t.grad(no);
        for (int64_t i = 0; i < n; ++i) go[i] += s * g[i];
      }
      if (ng >= 0) {
        S acc = S(0);
        for (int64_t i = 0; i < n; ++i) acc += g[i] * (*dother)[static_cast<size_t>(i)];
        t.grad(ng)[0] += acc;
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> tanh_op(const Tensor<S>& a) {
  Tensor<S> out(a.shape());
  const S* pa = a.data();
  S* po = out.mutable_data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = std::tanh(pa[i]);
  if (Tape<S>* tp = detail::tape_of(a)) {
    const int na = a.node();
    auto dy = out.storage();
    tp->emit(out, [na, n, dy](Tape<S>& t, const S* g) {
      if (na >= 0) {
        auto& ga = t.grad(na);
        for (int64_t i = 0; i < n; ++i) {
          const S y = (*dy)[static_cast<size_t>(i)];
          ga[i] += g[i] * (S(1) - y * y);
        }
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> relu(const Tensor<S>& a) {
  Tensor<S> out(a.shape());
  const S* pa = a.data();
  S* po = out.mutable_data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = pa[i] > S(0) ? pa[i] : S(0);
  if (Tape<S>* tp = detail::tape_of(a)) {
    const int na = a.node();
    auto dx = a.storage();
    tp->emit(out, [na, n, dx](Tape<S>& t, const S* g) {
      if (na >= 0) {
        auto& ga = t.grad(na);
        for (int64_t i = 0; i < n; ++i)
          if ((*dx)[static_cast<size_t>(i)] > S(0)) ga[i] += g[i];
      }
    });
  }
  return out;
}

/// Standard matrix product, a[m x k] * b[k x n].
template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.ndim() != 2 || b.ndim() != 2)
    throw DimensionError("matmul: expects 2-D operands");
  if (a.dim(1) != b.dim(0))
    throw DimensionError("matmul: inner extents disagree, " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<S> out({m, n});
  gemm_nn(m, n, k, a.data(), b.data(), out.mutable_data());
  if (Tape<S>* tp = detail::tape_of(a, b)) {
    const int na = a.node(), nb = b.node();
    auto da = a.storage();
    auto db = b.storage();
    tp->emit(out, [na, nb, m, n, k, da, db](Tape<S>& t, const S* g) {
      if (na >= 0) {
        // dA = G * B^T. Both routes sum over ascending n; pick by dot length.
        std::vector<S> dA(static_cast<size_t>(m) * k, S(0));
        if (n >= k) {
          gemm_nt(m, k, n, g, db->data(), dA.data());
        } else {
          std::vector<S> bt(static_cast<size_t>(n) * k);
          transpose_copy(k, n, db->data(), bt.data());
          gemm_nn(m, k, n, g, bt.data(), dA.data());
        }
        detail::accumulate(t, na, dA.data(), static_cast<int64_t>(dA.size()));
      }
      if (nb >= 0) {
        std::vector<S> dB(static_cast<size_t>(k) * n, S(0));
        gemm_tn(k, n, m, da->data(), g, dB.data());  // dB = A^T * G
        detail::accumulate(t, nb, dB.data(), static_cast<int64_t>(dB.size()));
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> transpose(const Tensor<S>& a) {
  if (a.ndim() != 2) throw DimensionError("transpose: expects 2-D operand");
  const int r = a.dim(0), c = a.dim(1);
  Tensor<S> out({c, r});
  transpose_copy(r, c, a.data(), out.mutable_data());
  if (Tape<S>* tp = detail::tape_of(a)) {
    const int na = a.node();
    tp->emit(out, [na, r, c](Tape<S>& t, const S* g) {
      if (na >= 0) {
        auto& ga = t.grad(na);
        for (int i = 0; i < c; ++i)
          for (int j = 0; j < r; ++j) ga[static_cast<size_t>(j) * c + i] += g[static_cast<int64_t>(i) * r + j];
      }
    });
  }
  return out;
}

/// Softmax along `axis`. Max-subtracted for stability; -inf logits are legal
/// mask sentinels and receive exactly zero weight. A slice that is entirely
/// -inf violates the masking contract.
template <class S>
Tensor<S> softmax(const Tensor<S>& a, int axis) {
  if (axis < 0) axis += a.ndim();
  if (axis < 0 || axis >= a.ndim()) throw ParameterError("softmax: axis out of range");
  const int extent = a.dim(axis);
  int64_t inner = 1, outer = 1;
  for (int i = 0; i < a.ndim(); ++i) {
    if (i < axis) outer *= a.dim(i);
    if (i > axis) inner *= a.dim(i);
  }
  Tensor<S> out(a.shape());
  const S* px = a.data();
  S* py = out.mutable_data();
  const S neg_inf = -std::numeric_limits<S>::infinity();
  const auto slice = [&](int64_t base, int64_t stride) {
    S mx = neg_inf;
    for (int e = 0; e < extent; ++e) mx = std::max(mx, px[base + e * stride]);
    if (mx == neg_inf) {
      for (int e = 0; e < extent; ++e)
        if (std::isnan(static_cast<double>(px[base + e * stride])))
          throw MaskingError("softmax: non-finite input");
      throw MaskingError("softmax: slice is fully masked");
    }
    S sum = S(0);
    for (int e = 0; e < extent; ++e) {
      const S x = px[base + e * stride];
      const S v = x == neg_inf ? S(0) : detail::softmax_exp(x - mx);
      py[base + e * stride] = v;
      sum += v;
    }
    const S inv = S(1) / sum;
    for (int e = 0; e < extent; ++e) py[base + e * stride] *= inv;
  };
  if (inner == 1) {
    for (int64_t o = 0; o < outer; ++o) slice(o * extent, 1);
  } else {
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t in = 0; in < inner; ++in) slice(o * extent * inner + in, inner);
  }
  if (Tape<S>* tp = detail::tape_of(a)) {
    const int na = a.node();
    auto dy = out.storage();
    tp->emit(out, [na, outer, inner, extent, dy](Tape<S>& t, const S* g) {
      if (na < 0) return;
      auto& ga = t.grad(na);
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = o * extent * inner + in;
          S dot = S(0);
          for (int e = 0; e < extent; ++e) {
            const int64_t i = base + e * inner;
            dot += g[i] * (*dy)[static_cast<size_t>(i)];
          }
          for (int e = 0; e < extent; ++e) {
            const int64_t i = base + e * inner;
            ga[i] += (*dy)[static_cast<size_t>(i)] * (g[i] - dot);
          }
        }
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> sum_all(const Tensor<S>& a) {
  S acc = S(0);
  const S* pa = a.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) acc += pa[i];
  Tensor<S> out = Tensor<S>::scalar(acc);
  if (Tape<S>* tp = detail::tape_of(a)) {
    const int na = a.node();
    tp->emit(out, [na, n](Tape<S>& t, const S* g) {
      if (na >= 0) {
        auto& ga = t.grad(na);
        for (int64_t i = 0; i < n; ++i) ga[i] += g[0];
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> mean_all(const Tensor<S>& a) {
  const int64_t n = a.numel();
  S acc = S(0);
  const S* pa = a.data();
  for (int64_t i = 0; i < n; ++i) acc += pa[i];
  Tensor<S> out = Tensor<S>::scalar(acc / static_cast<S>(n));
  if (Tape<S>* tp = detail::tape_of(a)) {
    const int na = a.node();
    tp->emit(out, [na, n](Tape<S>& t, const S* g) {
      if (na >= 0) {
        auto& ga = t.grad(na);
        const S w = g[0] / static_cast<S>(n);
        for (int64_t i = 0; i < n; ++i) ga[i] += w;
      }
    });
  }
  return out;
}

/// Mean squared error between two equally-shaped tensors.
template <class S>
Tensor<S> mse(const Tensor<S>& a, const Tensor<S>& b) {
  check_same_shape(a, b, "mse");
  Tensor<S> d = sub(a, b);
  return mean_all(mul(d, d));
}

template <class S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw DimensionError("reshape: element count mismatch");
  Tensor<S> out = Tensor<S>::from(std::move(shape), std::vector<S>(a.data(), a.data() + a.numel()));
  if (Tape<S>* tp = detail::tape_of(a)) {
    const int na = a.node();
    const int64_t n = a.numel();
    tp->emit(out, [na, n](Tape<S>& t, const S* g) { detail::accumulate(t, na, g, n); });
  }
  return out;
}

/// [C,H,W] -> [H*W, C]: flattens pixels into attention rows.
template <class S>
Tensor<S> chw_to_nc(const Tensor<S>& a) {
  if (a.ndim() != 3) throw DimensionError("chw_to_nc: expects [C,H,W]");
  const int c = a.dim(0), hw = a.dim(1) * a.dim(2);
  Tensor<S> out({hw, c});
  const S* px = a.data();
  S* py = out.mutable_data();
  for (int ch = 0; ch < c; ++ch)
    for (int p = 0; p < hw; ++p) py[static_cast<int64_t>(p) * c + ch] = px[static_cast<int64_t>(ch) * hw + p];
  if (Tape<S>* tp = detail::tape_of(a)) {
    const int na = a.node();
    tp->emit(out, [na, c, hw](Tape<S>& t, const S* g) {
      if (na < 0) return;
      auto& ga = t.grad(na);
      for (int ch = 0; ch < c; ++ch)
        for (int p = 0; p < hw; ++p) ga[static_cast<size_t>(ch) * hw + p] += g[static_cast<int64_t>(p) * c + ch];
    });
  }
  return out;
}

/// [H*W, C] -> [C,H,W], inverse of chw_to_nc.
template <class S>
Tensor<S> nc_to_chw(const Tensor<S>& a, int h, int w) {
  if (a.ndim() != 2 || a.dim(0) != h * w) throw DimensionError("nc_to_chw: row count must equal H*W");
  const int c = a.dim(1), hw = h * w;
  Tensor<S> out({c, h, w});
  const S* px = a.data();
  S* py = out.mutable_data();
  for (int p = 0; p < hw; ++p)
    for (int ch = 0; ch < c; ++ch) py[static_cast<int64_t>(ch) * hw + p] = px[static_cast<int64_t>(p) * c + ch];
  if (Tape<S>* tp = detail::tape_of(a)) {
    const int na = a.node();
    tp->emit(out, [na, c, hw](Tape<S>& t, const S* g) {
      if (na < 0) return;
      auto& ga = t.grad(na);
      for (int p = 0; p < hw; ++p)
        for (int ch = 0; ch < c; ++ch) ga[static_cast<size_t>(p) * c + ch] += g[static_cast<int64_t>(ch) * hw + p];
    });
  }
  return out;
}

/// Channel concatenation of two [C,H,W] maps with equal spatial extents.
template <class S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
    throw DimensionError("concat_channels: spatial extents differ");
  const int ca = a.dim(0), cb = b.dim(0), hw = a.dim(1) * a.dim(2);
  Tensor<S> out({ca + cb, a.dim(1), a.dim(2)});
  S* py = out.mutable_data();
  std::copy(a.data(), a.data() + a.numel(), py);
  std::copy(b.data(), b.data() + b.numel(), py + a.numel());
  if (Tape<S>* tp = detail::tape_of(a, b)) {
    const int na = a.node(), nb = b.node();
    const int64_t sa = a.numel(), sb = b.numel();
    tp->emit(out, [na, nb, sa, sb, hw, ca, cb](Tape<S>& t, const S* g) {
      (void)hw;
      (void)ca;
      (void)cb;
      detail::accumulate(t, na, g, sa);
      detail::accumulate(t, nb, g + sa, sb);
    });
  }
  return out;
}

/// Row gather from an embedding table; duplicate ids accumulate gradient.
template <class S>
Tensor<S> embed_rows(const Tensor<S>& table, const std::vector<int>& ids) {
  if (table.ndim() != 2) throw DimensionError("embed_rows: table must be 2-D");
  const int v = table.dim(0), c = table.dim(1);
  for (int id : ids)
    if (id < 0 || id >= v) throw VocabularyError("embed_rows: id out of vocabulary range");
  Tensor<S> out({static_cast<int>(ids.size()), c});
  S* py = out.mutable_data();
  const S* px = table.data();
  for (size_t i = 0; i < ids.size(); ++i)
    std::copy(px + static_cast<int64_t>(ids[i]) * c, px + static_cast<int64_t>(ids[i] + 1) * c,
              py + static_cast<int64_t>(i) * c);
  if (Tape<S>* tp = detail::tape_of(table)) {
    const int nt = table.node();
    auto idcopy = ids;
    tp->emit(out, [nt, idcopy, c](Tape<S>& t, const S* g) {
      if (nt < 0) return;
      auto& gt = t.grad(nt);
      for (size_t i = 0; i < idcopy.size(); ++i)
        for (int j = 0; j < c; ++j)
          gt[static_cast<size_t>(idcopy[i]) * c + j] += g[static_cast<int64_t>(i) * c + j];
    });
  }
  return out;
}

/// x[R,C] + bias[C] broadcast over rows.
template <class S>
Tensor<S> add_row_bias(const Tensor<S>& x, const Tensor<S>& bias) {
  if (x.ndim() != 2 || bias.ndim() != 1 || bias.dim(0) != x.dim(1))
    throw DimensionError("add_row_bias: bias extent must match columns");
  const int r = x.dim(0), c = x.dim(1);
  Tensor<S> out(x.shape());
  const S* px = x.data();
  const S* pb = bias.data();
  S* py = out.mutable_data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) py[static_cast<int64_t>(i) * c + j] = px[static_cast<int64_t>(i) * c + j] + pb[j];
  if (Tape<S>* tp = detail::tape_of(x, bias)) {
    const int nx = x.node(), nb = bias.node();
    tp->emit(out, [nx, nb, r, c](Tape<S>& t, const S* g) {
      detail::accumulate(t, nx, g, static_cast<int64_t>(r) * c);
      if (nb >= 0) {
        auto& gb = t.grad(nb);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gb[static_cast<size_t>(j)] += g[static_cast<int64_t>(i) * c + j];
      }
    });
  }
  return out;
}

/// x[C,H,W] + bias[C] broadcast over the spatial plane.
template <class S>
Tensor<S> add_chw_bias(const Tensor<S>& x, const Tensor<S>& bias) {
  if (x.ndim() != 3 || bias.ndim() != 1 || bias.dim(0) != x.dim(0))
    throw DimensionError("add_chw_bias: bias extent must match channels");
  const int c = x.dim(0);
  const int64_t hw = static_cast<int64_t>(x.dim(1)) * x.dim(2);
  Tensor<S> out(x.shape());
  const S* px = x.data();
  const S* pb = bias.data();
  S* py = out.mutable_data();
  for (int ch = 0; ch < c; ++ch)
    for (int64_t p = 0; p < hw; ++p) py[ch * hw + p] = px[ch * hw + p] + pb[ch];
  if (Tape<S>* tp = detail::tape_of(x, bias)) {
    const int nx = x.node(), nb = bias.node();
    tp->emit(out, [nx, nb, c, hw](Tape<S>& t, const S* g) {
      detail::accumulate(t, nx, g, c * hw);
      if (nb >= 0) {
        auto& gb = t.grad(nb);
        for (int ch = 0; ch < c; ++ch) {
          S acc = S(0);
          for (int64_t p = 0; p < hw; ++p) acc += g[ch * hw + p];
          gb[static_cast<size_t>(ch)] += acc;
        }
      }
    });
  }
  return out;
}

/// 2x2 average pooling; requires even spatial extents.
template <class S>
Tensor<S> avgpool2x2(const Tensor<S>& x) {
  if (x.ndim() != 3 || x.dim(1) % 2 || x.dim(2) % 2)
    throw DimensionError("avgpool2x2: spatial extents must be even");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2), ho = h / 2, wo = w / 2;
  Tensor<S> out({c, ho, wo});
  const S* px = x.data();
  S* py = out.mutable_data();
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < ho; ++y)
      for (int xx = 0; xx < wo; ++xx) {
        const int64_t b = (static_cast<int64_t>(ch) * h + 2 * y) * w + 2 * xx;
        py[(static_cast<int64_t>(ch) * ho + y) * wo + xx] =
            (px[b] + px[b + 1] + px[b + w] + px[b + w + 1]) * S(0.25);
      }
  if (Tape<S>* tp = detail::tape_of(x)) {
    const int nx = x.node();
    tp->emit(out, [nx, c, h, w, ho, wo](Tape<S>& t, const S* g) {
      if (nx < 0) return;
      auto& gx = t.grad(nx);
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < ho; ++y)
          for (int xx = 0; xx < wo; ++xx) {
            const S v = g[(static_cast<int64_t>(ch) * ho + y) * wo + xx] * S(0.25);
            const int64_t b = (static_cast<int64_t>(ch) * h + 2 * y) * w + 2 * xx;
            gx[static_cast<size_t>(b)] += v;
            gx[static_cast<size_t>(b + 1)] += v;
            gx[static_cast<size_t>(b + w)] += v;
            gx[static_cast<size_t>(b + w + 1)] += v;
          }
    });
  }
  return out;
}

/// Nearest-neighbor 2x upsampling.
template <class S>
Tensor<S> upsample2x(const Tensor<S>& x) {
  if (x.ndim() != 3) throw DimensionError("upsample2x: expects [C,H,W]");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<S> out({c, 2 * h, 2 * w});
  const S* px = x.data();
  S* py = out.mutable_data();
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        const S v = px[(static_cast<int64_t>(ch) * h + y) * w + xx];
        const int64_t b = (static_cast<int64_t>(ch) * 2 * h + 2 * y) * 2 * w + 2 * xx;
        py[b] = v;
        py[b + 1] = v;
        py[b + 2 * w] = v;
        py[b + 2 * w + 1] = v;
      }
  if (Tape<S>* tp = detail::tape_of(x)) {
    const int nx = x.node();
    tp->emit(out, [nx, c, h, w](Tape<S>& t, const S* g) {
      if (nx < 0) return;
      auto& gx = t.grad(nx);
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx) {
            const int64_t b = (static_cast<int64_t>(ch) * 2 * h + 2 * y) * 2 * w + 2 * xx;
            gx[(static_cast<size_t>(ch) * h + y) * w + xx] += g[b] + g[b + 1] + g[b + 2 * w] + g[b + 2 * w + 1];
          }
    });
  }
  return out;
}

}  // namespace cohdiff

#endif  // COHDIFF_OPS_HPP_

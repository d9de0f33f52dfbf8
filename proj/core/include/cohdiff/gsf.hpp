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

#ifndef COHDIFF_GSF_HPP_
#define COHDIFF_GSF_HPP_

#include <cmath>
#include <vector>

#include "cohdiff/attention.hpp"
#include "cohdiff/layout.hpp"
#include "cohdiff/nn_ops.hpp"
#include "cohdiff/ops.hpp"

namespace cohdiff {

template <class S>
struct GsfLayerParams {
  AttnParams<S> self_attn;   // q/k/v/out all [C, C]
  AttnParams<S> cross_attn;  // q [C, C]; k/v [C_t, C]; out [C, C]
  Parameter<S>* w_l = nullptr;  // feedforward [C, C], applied with no residual
};

template <class S>
struct GsfParams {
  Parameter<S>* in_w = nullptr;  // [(C+1), C] linear map after layout concat
  Parameter<S>* in_b = nullptr;  // [C]
  std::vector<GsfLayerParams<S>> layers;
  Parameter<S>* alpha = nullptr;  // injection gate, zero-initialized
  int num_classes = 1;            // id normalization divisor
  bool positional = false;        // optional sinusoidal positions for self-attn
};

/// Fixed sinusoidal encoding over flattened positions, one row per pixel.
template <class S>
Tensor<S> positional_encoding(int n_positions, int channels) {
  Tensor<S> out({n_positions, channels});
  S* po = out.mutable_data();
  for (int p = 0; p < n_positions; ++p)
    for (int c = 0; c < channels; ++c) {
      const double rate = std::pow(10000.0, -2.0 * (c / 2) / std::max(1, channels));
      const double arg = p * rate;
      po[static_cast<int64_t>(p) * channels + c] =
          static_cast<S>((c % 2 == 0) ? std::sin(arg) : std::cos(arg));
    }
  return out;
}

/// Concatenates the noisy image with the normalized layout channel and maps
/// each position from C+1 to C channels: O_0.
template <class S>
Tensor<S> layout_project(const Tensor<S>& z_t, const LayoutMap& s, const GsfParams<S>& p,
                         Tape<S>* tape) {
  if (z_t.ndim() != 3) throw DimensionError("layout_project: expects z_t[C,H,W]");
  const int h = z_t.dim(1), w = z_t.dim(2);
  if (s.h != h || s.w != w)
    throw DimensionError("layout_project: layout must already match the image grid");
  Tensor<S> s_chan({1, h, w});
  S* ps = s_chan.mutable_data();
  const S inv = S(1) / static_cast<S>(p.num_classes);
  for (int i = 0; i < h * w; ++i) ps[i] = static_cast<S>(s.ids[static_cast<size_t>(i)]) * inv;

  Tensor<S> stacked = concat_channels(z_t, s_chan);
  Tensor<S> rows = chw_to_nc(stacked);  // [N, C+1]
  Tensor<S> mapped = add_row_bias(matmul(rows, detail::use(tape, *p.in_w)),
                                  detail::use(tape, *p.in_b));
  return nc_to_chw(mapped, h, w);
}

/// One fusion layer: residual self-attention over the H*W positions,
/// residual cross-attention against the caption tokens, then the
/// feedforward matrix with no residual.
template <class S>
Tensor<S> gsf_layer(const Tensor<S>& o_prev, const Tensor<S>& y_e, const GsfLayerParams<S>& lp,
                    bool positional, Tape<S>* tape) {
  const int h = o_prev.dim(1), w = o_prev.dim(2);
  Tensor<S> tok = chw_to_nc(o_prev);
  Tensor<S> attn_in = tok;
  if (positional) {
    Tensor<S> pos = positional_encoding<S>(tok.dim(0), tok.dim(1));
    attn_in = add(tok, pos);
  }
  Tensor<S> q = matmul(attn_in, detail::use(tape, *lp.self_attn.wq));
  Tensor<S> k = matmul(attn_in, detail::use(tape, *lp.self_attn.wk));
  Tensor<S> v = matmul(attn_in, detail::use(tape, *lp.self_attn.wv));
  Tensor<S> f = add(scaled_attention(q, k, v, detail::use(tape, *lp.self_attn.wout)), tok);

  Tensor<S> cq = matmul(f, detail::use(tape, *lp.cross_attn.wq));
  Tensor<S> ck = matmul(y_e, detail::use(tape, *lp.cross_attn.wk));
  Tensor<S> cv = matmul(y_e, detail::use(tape, *lp.cross_attn.wv));
  Tensor<S> f2 = add(scaled_attention(cq, ck, cv, detail::use(tape, *lp.cross_attn.wout)), f);

  Tensor<S> o = matmul(f2, detail::use(tape, *lp.w_l));
  return nc_to_chw(o, h, w);
}

/// Full stack: layout projection then L fusion layers.
template <class S>
Tensor<S> gsf_forward(const Tensor<S>& z_t, const LayoutMap& s, const Tensor<S>& y_e,
                      const GsfParams<S>& p, Tape<S>* tape) {
  if (p.layers.empty()) throw ParameterError("gsf_forward: layer count must be >= 1");
  Tensor<S> o = layout_project(z_t, s, p, tape);
  for (const auto& lp : p.layers) o = gsf_layer(o, y_e, lp, p.positional, tape);
  return o;
}

/// z_t + tanh(alpha) * O_L; exactly the identity at alpha = 0.
template <class S>
Tensor<S> gated_inject(const Tensor<S>& z_t, const Tensor<S>& o_l, const Tensor<S>& alpha) {
  check_same_shape(z_t, o_l, "gated_inject");
  return add_scaled(z_t, o_l, tanh_op(alpha));
}

}  // namespace cohdiff

#endif  // COHDIFF_GSF_HPP_

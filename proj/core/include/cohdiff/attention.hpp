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

#ifndef COHDIFF_ATTENTION_HPP_
#define COHDIFF_ATTENTION_HPP_

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cohdiff/layout.hpp"
#include "cohdiff/nn_ops.hpp"
#include "cohdiff/ops.hpp"

namespace cohdiff {

/// Boolean pixel-to-token attention permit matrix (N_x rows, N_t columns).
/// Every pixel must be allowed at least one token.
class RegionMask {
 public:
  RegionMask(int n_pixels, int n_tokens, std::vector<uint8_t> allowed)
      : n_pixels_(n_pixels), n_tokens_(n_tokens), allowed_(std::move(allowed)) {
    if (static_cast<int64_t>(allowed_.size()) != static_cast<int64_t>(n_pixels_) * n_tokens_)
      throw DimensionError("RegionMask: permit matrix size mismatch");
    for (int i = 0; i < n_pixels_; ++i) {
      bool any = false;
      for (int j = 0; j < n_tokens_; ++j) any = any || allowed_[static_cast<size_t>(i) * n_tokens_ + j];
      if (!any)
        throw RectificationError("RegionMask: pixel " + std::to_string(i) + " allows no token");
    }
  }

  int n_pixels() const { return n_pixels_; }
  int n_tokens() const { return n_tokens_; }
  bool allowed(int pixel, int token) const {
    return allowed_[static_cast<size_t>(pixel) * n_tokens_ + token] != 0;
  }
  const std::vector<uint8_t>& raw() const { return allowed_; }

 private:
  int n_pixels_;
  int n_tokens_;
  std::vector<uint8_t> allowed_;
};

/// Builds the permit matrix from a layout: pixel i may attend exactly the
/// grounded slots carrying the word of its class. `class_words[c]` is the
/// vocabulary id naming class c; `grounded_ids` are the N_t slot contents
/// (pad slots simply never match a class word). `global_slots` lists slots
/// allowed everywhere (off by default).
inline RegionMask build_region_mask(const LayoutMap& layout, const std::vector<int>& grounded_ids,
                                    const std::vector<int>& class_words,
                                    const std::vector<int>& global_slots = {}) {
  const int n_pixels = layout.h * layout.w;
  const int n_tokens = static_cast<int>(grounded_ids.size());
  std::vector<uint8_t> allowed(static_cast<size_t>(n_pixels) * n_tokens, 0);
  for (int p = 0; p < n_pixels; ++p) {
    const int cls = layout.ids[static_cast<size_t>(p)];
    if (cls >= static_cast<int>(class_words.size()))
      throw RectificationError("layout class " + std::to_string(cls) + " has no class word");
    const int word = class_words[static_cast<size_t>(cls)];
    bool any = false;
    for (int s = 0; s < n_tokens; ++s) {
      if (grounded_ids[static_cast<size_t>(s)] == word) {
        allowed[static_cast<size_t>(p) * n_tokens + s] = 1;
        any = true;
      }
    }
    for (int s : global_slots) {
      allowed[static_cast<size_t>(p) * n_tokens + s] = 1;
      any = true;
    }
    if (!any)
      throw RectificationError("layout class " + std::to_string(cls) +
                               " is missing from the grounded text");
  }
  return RegionMask(n_pixels, n_tokens, std::move(allowed));
}

/// Projection set for one attention block: separate query/key/value maps
/// into the shared attention width plus the output projection back to the
/// block width. Single-head; head_count is kept for config echo.
template <class S>
struct AttnParams {
  Parameter<S>* wq = nullptr;  // [C_q_in, C]
  Parameter<S>* wk = nullptr;  // [C_kv_in, C]
  Parameter<S>* wv = nullptr;  // [C_kv_in, C]
  Parameter<S>* wout = nullptr;  // [C, C_x]
  int head_count = 1;
};

/// tanh-bounded fusion weight; effective gate is tanh(beta) in (-1, 1).
template <class S>
struct FusionGate {
  Parameter<S>* beta = nullptr;
};

namespace detail {
template <class S>
Tensor<S> use(Tape<S>* tape, Parameter<S>& p) {
  return tape ? tape->param(p) : p.value;
}
}  // namespace detail

/// softmax(q k^T / sqrt(C)) v followed by the output projection. q, k, v are
/// already projected; `w_out` maps the attention width to the block width.
template <class S>
Tensor<S> scaled_attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                           const Tensor<S>& w_out) {
  if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2)
    throw DimensionError("scaled_attention: expects 2-D q/k/v");
  if (q.dim(1) != k.dim(1)) throw DimensionError("scaled_attention: q/k width mismatch");
  if (k.dim(0) != v.dim(0)) throw DimensionError("scaled_attention: k/v row mismatch");
  if (k.dim(0) == 0) throw ParameterError("scaled_attention: empty context");
  const S inv_sqrt_c = S(1) / std::sqrt(static_cast<S>(q.dim(1)));
  Tensor<S> logits = scale(matmul(q, transpose(k)), inv_sqrt_c);
  Tensor<S> weights = softmax(logits, -1);
  return matmul(matmul(weights, v), w_out);
}

/// Cross attention whose logits are forced to -inf outside each pixel's
/// layout region, so disallowed tokens get exactly zero weight after the
/// softmax. Output is projected through `w_out`.
template <class S>
Tensor<S> rectified_attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                              const RegionMask& mask, const Tensor<S>& w_out) {
  if (q.dim(0) != mask.n_pixels() || k.dim(0) != mask.n_tokens())
    throw DimensionError("rectified_attention: mask extents do not match q/k");
  const S inv_sqrt_c = S(1) / std::sqrt(static_cast<S>(q.dim(1)));
  Tensor<S> logits = scale(matmul(q, transpose(k)), inv_sqrt_c);
  Tensor<S> weights = softmax(mask_logits(logits, mask.raw()), -1);
  return matmul(matmul(weights, v), w_out);
}

/// Attention weight matrix of the rectified path (diagnostics/tests only).
template <class S>
Tensor<S> rectified_attention_weights(const Tensor<S>& q, const Tensor<S>& k,
                                      const RegionMask& mask) {
  const S inv_sqrt_c = S(1) / std::sqrt(static_cast<S>(q.dim(1)));
  Tensor<S> logits = scale(matmul(q, transpose(k)), inv_sqrt_c);
  return softmax(mask_logits(logits, mask.raw()), -1);
}

/// Raw self-similarity stack SS[k^2,H,W] (see self_similarity for layout).
template <class S>
Tensor<S> self_similarity_map(const Tensor<S>& q_r, int k) {
  return self_similarity(q_r, k);
}

/// Two "same"-padded convolutions with ReLUs that widen the receptive field
/// and lift k^2 similarity channels to one channel per token slot.
template <class S>
Tensor<S> expand_similarity(const Tensor<S>& ss, const Tensor<S>& w1, const Tensor<S>& b1,
                            const Tensor<S>& w2, const Tensor<S>& b2) {
  if (w1.dim(1) != ss.dim(0))
    throw DimensionError("expand_similarity: conv1 in-channels must equal k^2");
  return relu(conv2d(relu(conv2d(ss, w1, b1, Padding::kSame)), w2, b2, Padding::kSame));
}

/// Token-weighted readout of the expanded similarity maps: rows of m become
/// per-pixel token logits, softmaxed over the token axis, applied to v, then
/// projected. m: [N_t,H,W], v: [N_t,C], w_out: [C,C_x] -> [H*W, C_x].
template <class S>
Tensor<S> sca_attend(const Tensor<S>& m, const Tensor<S>& v, const Tensor<S>& w_out) {
  if (m.ndim() != 3) throw DimensionError("sca_attend: expects m[N_t,H,W]");
  if (m.dim(0) != v.dim(0)) throw DimensionError("sca_attend: token counts disagree");
  Tensor<S> logits = chw_to_nc(m);  // [N_x, N_t]
  Tensor<S> weights = softmax(logits, -1);
  return matmul(matmul(weights, v), w_out);
}

/// I_RCA + tanh(beta) * I_SCA with a scalar gate tensor.
template <class S>
Tensor<S> sfe_fuse(const Tensor<S>& i_rca, const Tensor<S>& i_sca, const Tensor<S>& beta) {
  check_same_shape(i_rca, i_sca, "sfe_fuse");
  return add_scaled(i_rca, i_sca, tanh_op(beta));
}

/// Raw + expanded similarity maps of one forward pass, kept for
/// visualization. half_window is (k-1)/2.
template <class S>
struct SimilarityMaps {
  Tensor<S> ss;  // [k^2, H, W]
  Tensor<S> m;   // [N_t, H, W]
  int k = 0;
  int half_window = 0;
};

/// Learnable state of one SFE block: shared q/k/v/out projections, the two
/// context-expansion convolutions, and the fusion gate.
template <class S>
struct SfeBlockParams {
  AttnParams<S> attn;
  Parameter<S>* conv1_w = nullptr;  // [hidden, k^2, 3, 3]
  Parameter<S>* conv1_b = nullptr;
  Parameter<S>* conv2_w = nullptr;  // [N_t, hidden, 3, 3]
  Parameter<S>* conv2_b = nullptr;
  FusionGate<S> gate;
  int window = 3;
  std::string name;
};

template <class S>
struct SfeResult {
  Tensor<S> out;  // [N_x, C_x]
  SimilarityMaps<S> maps;
};

/// Full SFE block on flattened image features x_nc [N_x, C_x]:
/// q/k/v projections, rectified cross attention, the self-similarity path,
/// and the tanh-gated fusion of the two projected outputs.
template <class S>
SfeResult<S> sfe_block(const Tensor<S>& x_nc, const Tensor<S>& y_g, const RegionMask& mask,
                       const SfeBlockParams<S>& p, int h, int w, Tape<S>* tape) {
  Tensor<S> q = matmul(x_nc, detail::use(tape, *p.attn.wq));
  Tensor<S> k = matmul(y_g, detail::use(tape, *p.attn.wk));
  Tensor<S> v = matmul(y_g, detail::use(tape, *p.attn.wv));
  Tensor<S> w_out = detail::use(tape, *p.attn.wout);

  Tensor<S> i_rca = rectified_attention(q, k, v, mask, w_out);

  Tensor<S> q_r = nc_to_chw(q, h, w);
  SimilarityMaps<S> maps;
  maps.k = p.window;
  maps.half_window = (p.window - 1) / 2;
  maps.ss = self_similarity_map(q_r, p.window);
  maps.m = expand_similarity(maps.ss, detail::use(tape, *p.conv1_w), detail::use(tape, *p.conv1_b),
                             detail::use(tape, *p.conv2_w), detail::use(tape, *p.conv2_b));
  Tensor<S> i_sca = sca_attend(maps.m, v, w_out);

  SfeResult<S> res;
  res.out = sfe_fuse(i_rca, i_sca, detail::use(tape, *p.gate.beta));
  res.maps = std::move(maps);
  return res;
}

}  // namespace cohdiff

#endif  // COHDIFF_ATTENTION_HPP_

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

#include "cohdiff/verify.hpp"

#include <cmath>
#include <sstream>

#include "cohdiff/attention.hpp"
#include "cohdiff/diffusion.hpp"
#include "cohdiff/grad_check.hpp"
#include "cohdiff/gsf.hpp"
#include "cohdiff/oracle.hpp"
#include "cohdiff/rng.hpp"
#include "cohdiff/scene.hpp"
#include "cohdiff/trainer.hpp"
#include "cohdiff/unet.hpp"

namespace cohdiff::verify {

namespace {

using DT = Tensor<double>;

DT randn(Rng& rng, Shape shape, double sigma = 1.0) {
  DT t(std::move(shape));
  rng.fill_normal(t.mutable_data(), t.numel(), sigma);
  return t;
}

CheckResult pass_fail(const std::string& name, bool ok, uint64_t seed, const std::string& detail) {
  return CheckResult{name, ok, ok ? "" : detail, seed};
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// --- oracle checks -------------------------------------------------------

CheckResult check_matmul_oracle(uint64_t seed) {
  for (int c = 0; c < 50; ++c) {
    const uint64_t s = split_seed(seed, static_cast<uint64_t>(c));
    Rng rng(s);
    const int m = static_cast<int>(rng.uniform_int(1, 9));
    const int k = static_cast<int>(rng.uniform_int(1, 9));
    const int n = static_cast<int>(rng.uniform_int(1, 9));
    DT a = randn(rng, {m, k});
    DT b = randn(rng, {k, n});
    const double d = max_abs_diff(matmul(a, b), oracle::matmul_oracle(a, b));
    if (d > 1e-12)
      return pass_fail("oracle.matmul", false, s, "case " + std::to_string(c) + " diff " + fmt(d));
  }
  return pass_fail("oracle.matmul", true, seed, "");
}

CheckResult check_softmax_oracle(uint64_t seed, const SoftmaxFn& softmax_fn) {
  for (int c = 0; c < 50; ++c) {
    const uint64_t s = split_seed(seed, 1000 + static_cast<uint64_t>(c));
    Rng rng(s);
    const int r = static_cast<int>(rng.uniform_int(1, 8));
    const int n = static_cast<int>(rng.uniform_int(1, 8));
    DT x = randn(rng, {r, n}, 3.0);
    const double d = max_abs_diff(softmax_fn(x, -1), oracle::softmax_oracle(x));
    if (d > 1e-12)
      return pass_fail("oracle.softmax", false, s, "case " + std::to_string(c) + " diff " + fmt(d));
  }
  return pass_fail("oracle.softmax", true, seed, "");
}

CheckResult check_conv_oracle(uint64_t seed) {
  for (int c = 0; c < 50; ++c) {
    const uint64_t s = split_seed(seed, 2000 + static_cast<uint64_t>(c));
    Rng rng(s);
    const int cin = static_cast<int>(rng.uniform_int(1, 4));
    const int cout = static_cast<int>(rng.uniform_int(1, 4));
    const int h = static_cast<int>(rng.uniform_int(3, 10));
    const int w = static_cast<int>(rng.uniform_int(3, 10));
    const int k = rng.uniform() < 0.5 ? 1 : 3;
    DT x = randn(rng, {cin, h, w});
    DT wt = randn(rng, {cout, cin, k, k});
    DT b = randn(rng, {cout});
    const double d =
        max_abs_diff(conv2d(x, wt, b, Padding::kSame), oracle::conv_oracle(x, wt, b, true));
    if (d > 1e-10)
      return pass_fail("oracle.conv2d", false, s, "case " + std::to_string(c) + " diff " + fmt(d));
  }
  return pass_fail("oracle.conv2d", true, seed, "");
}

CheckResult check_ss_oracle(uint64_t seed) {
  const int ks[3] = {1, 3, 5};
  for (int c = 0; c < 100; ++c) {
    const uint64_t s = split_seed(seed, 3000 + static_cast<uint64_t>(c));
    Rng rng(s);
    const int ch = static_cast<int>(rng.uniform_int(1, 8));
    const int h = static_cast<int>(rng.uniform_int(3, 16));
    const int w = static_cast<int>(rng.uniform_int(3, 16));
    const int k = ks[rng.uniform_int(0, 2)];
    DT x = randn(rng, {ch, h, w});
    const double d = max_abs_diff(self_similarity_map(x, k), oracle::ss_oracle(x, k));
    if (d > 1e-12)
      return pass_fail("oracle.self_similarity", false, s,
                       "case " + std::to_string(c) + " diff " + fmt(d));
  }
  return pass_fail("oracle.self_similarity", true, seed, "");
}

CheckResult check_scaled_attention_oracle(uint64_t seed) {
  for (int c = 0; c < 50; ++c) {
    const uint64_t s = split_seed(seed, 4000 + static_cast<uint64_t>(c));
    Rng rng(s);
    const int nq = static_cast<int>(rng.uniform_int(1, 8));
    const int nk = static_cast<int>(rng.uniform_int(1, 8));
    const int cw = static_cast<int>(rng.uniform_int(1, 8));
    const int cx = static_cast<int>(rng.uniform_int(1, 8));
    DT q = randn(rng, {nq, cw}), k = randn(rng, {nk, cw}), v = randn(rng, {nk, cw});
    DT w_out = randn(rng, {cw, cx});
    DT got = scaled_attention(q, k, v, w_out);
    DT want = oracle::matmul_oracle(oracle::attn_oracle(q, k, v), w_out);
    const double d = max_abs_diff(got, want);
    if (d > 1e-10)
      return pass_fail("oracle.scaled_attention", false, s,
                       "case " + std::to_string(c) + " diff " + fmt(d));
  }
  return pass_fail("oracle.scaled_attention", true, seed, "");
}

std::vector<uint8_t> random_mask(Rng& rng, int rows, int cols) {
  std::vector<uint8_t> allowed(static_cast<size_t>(rows) * cols, 0);
  for (int i = 0; i < rows; ++i) {
    bool any = false;
    for (int j = 0; j < cols; ++j) {
      allowed[static_cast<size_t>(i) * cols + j] = rng.uniform() < 0.5;
      any = any || allowed[static_cast<size_t>(i) * cols + j];
    }
    if (!any) allowed[static_cast<size_t>(i) * cols + rng.uniform_int(0, cols - 1)] = 1;
  }
  return allowed;
}

CheckResult check_rectified_oracle(uint64_t seed) {
  for (int c = 0; c < 50; ++c) {
    const uint64_t s = split_seed(seed, 5000 + static_cast<uint64_t>(c));
    Rng rng(s);
    const int nx = static_cast<int>(rng.uniform_int(1, 8));
    const int nt = static_cast<int>(rng.uniform_int(1, 6));
    const int cw = static_cast<int>(rng.uniform_int(1, 8));
    const int cx = static_cast<int>(rng.uniform_int(1, 8));
    DT q = randn(rng, {nx, cw}), k = randn(rng, {nt, cw}), v = randn(rng, {nt, cw});
    DT w_out = randn(rng, {cw, cx});
    auto allowed = random_mask(rng, nx, nt);
    RegionMask mask(nx, nt, allowed);
    DT got = rectified_attention(q, k, v, mask, w_out);
    DT want = oracle::matmul_oracle(oracle::attn_oracle(q, k, v, &allowed), w_out);
    const double d = max_abs_diff(got, want);
    if (d > 1e-10)
      return pass_fail("oracle.rectified_attention", false, s,
                       "case " + std::to_string(c) + " diff " + fmt(d));
  }
  return pass_fail("oracle.rectified_attention", true, seed, "");
}

CheckResult check_expand_oracle(uint64_t seed) {
  for (int c = 0; c < 50; ++c) {
    const uint64_t s = split_seed(seed, 6000 + static_cast<uint64_t>(c));
    Rng rng(s);
    const int k2 = 9;
    const int hidden = static_cast<int>(rng.uniform_int(2, 10));
    const int nt = static_cast<int>(rng.uniform_int(1, 8));
    const int h = static_cast<int>(rng.uniform_int(3, 10));
    const int w = static_cast<int>(rng.uniform_int(3, 10));
    DT ss = randn(rng, {k2, h, w});
    DT w1 = randn(rng, {hidden, k2, 3, 3}), b1 = randn(rng, {hidden});
    DT w2 = randn(rng, {nt, hidden, 3, 3}), b2 = randn(rng, {nt});
    DT got = expand_similarity(ss, w1, b1, w2, b2);
    // Oracle route: two naive convolutions with explicit ReLUs.
    DT h1 = oracle::conv_oracle(ss, w1, b1, true);
    for (int64_t i = 0; i < h1.numel(); ++i)
      h1.mutable_data()[i] = std::max(0.0, h1.data()[i]);
    DT h2 = oracle::conv_oracle(h1, w2, b2, true);
    for (int64_t i = 0; i < h2.numel(); ++i)
      h2.mutable_data()[i] = std::max(0.0, h2.data()[i]);
    const double d = max_abs_diff(got, h2);
    if (d > 1e-10)
      return pass_fail("oracle.expand_similarity", false, s,
                       "case " + std::to_string(c) + " diff " + fmt(d));
  }
  return pass_fail("oracle.expand_similarity", true, seed, "");
}

CheckResult check_sca_oracle(uint64_t seed) {
  for (int c = 0; c < 50; ++c) {
    const uint64_t s = split_seed(seed, 7000 + static_cast<uint64_t>(c));
    Rng rng(s);
    const int nt = static_cast<int>(rng.uniform_int(1, 8));
    const int h = static_cast<int>(rng.uniform_int(2, 8));
    const int w = static_cast<int>(rng.uniform_int(2, 8));
    const int cw = static_cast<int>(rng.uniform_int(1, 8));
    const int cx = static_cast<int>(rng.uniform_int(1, 8));
    DT m = randn(rng, {nt, h, w});
    DT v = randn(rng, {nt, cw});
    DT w_out = randn(rng, {cw, cx});
    DT got = sca_attend(m, v, w_out);
    // Oracle route: explicit reshape/transpose, exp-normalize, weight, project.
    DT logits({h * w, nt});
    for (int p = 0; p < h * w; ++p)
      for (int tkn = 0; tkn < nt; ++tkn)
        logits.mutable_data()[p * nt + tkn] = m.data()[tkn * h * w + p];
    DT soft = oracle::softmax_oracle(logits);
    DT want = oracle::matmul_oracle(oracle::matmul_oracle(soft, v), w_out);
    const double d = max_abs_diff(got, want);
    if (d > 1e-10)
      return pass_fail("oracle.sca_attend", false, s, "case " + std::to_string(c) + " diff " + fmt(d));
  }
  return pass_fail("oracle.sca_attend", true, seed, "");
}

CheckResult check_resize_oracle(uint64_t seed) {
  for (int c = 0; c < 50; ++c) {
    const uint64_t s = split_seed(seed, 8000 + static_cast<uint64_t>(c));
    Rng rng(s);
    LayoutMap m(static_cast<int>(rng.uniform_int(1, 12)), static_cast<int>(rng.uniform_int(1, 12)));
    for (auto& id : m.ids) id = static_cast<uint8_t>(rng.uniform_int(0, 3));
    const int oh = static_cast<int>(rng.uniform_int(1, 16));
    const int ow = static_cast<int>(rng.uniform_int(1, 16));
    if (!(resize_nearest(m, oh, ow) == oracle::resize_oracle(m, oh, ow)))
      return pass_fail("oracle.resize_nearest", false, s, "case " + std::to_string(c));
  }
  return pass_fail("oracle.resize_nearest", true, seed, "");
}

// --- gradient checks -----------------------------------------------------

CheckResult grad_result(const std::string& name, uint64_t seed, const GradCheckResult& r) {
  const bool ok = r.max_rel_error <= 1e-4;
  return pass_fail(name, ok, seed,
                   "max rel err " + fmt(r.max_rel_error) + " at " + r.worst_param + "[" +
                       std::to_string(r.worst_index) + "] analytic " + fmt(r.analytic) +
                       " numeric " + fmt(r.numeric));
}

CheckResult check_grad_core_ops(uint64_t seed) {
  // Randomized matmul/softmax/conv chains, 100 trials.
  for (int c = 0; c < 100; ++c) {
    const uint64_t s = split_seed(seed, 9000 + static_cast<uint64_t>(c));
    Rng rng(s);
    ParamStore<double> ps;
    const int m = static_cast<int>(rng.uniform_int(2, 5));
    const int k = static_cast<int>(rng.uniform_int(2, 5));
    const int n = static_cast<int>(rng.uniform_int(2, 5));
    auto& a = ps.create("a", randn(rng, {m, k}));
    auto& b = ps.create("b", randn(rng, {k, n}));
    const int cin = static_cast<int>(rng.uniform_int(1, 3));
    const int cout = static_cast<int>(rng.uniform_int(1, 3));
    auto& x = ps.create("x", randn(rng, {cin, 5, 4}));
    auto& w = ps.create("w", randn(rng, {cout, cin, 3, 3}));
    auto& bias = ps.create("bias", randn(rng, {cout}));
    DT probe = randn(rng, {m, n});
    auto loss_fn = [&](Tape<double>* tape) {
      DT ta = tape ? tape->param(a) : a.value;
      DT tb = tape ? tape->param(b) : b.value;
      DT y = softmax(matmul(ta, tb), -1);
      DT l1 = mean_all(mul(y, probe));
      DT tx = tape ? tape->param(x) : x.value;
      DT tw = tape ? tape->param(w) : w.value;
      DT tbias = tape ? tape->param(bias) : bias.value;
      DT z = conv2d(tx, tw, tbias, Padding::kSame);
      DT l2 = mean_all(mul(z, z));
      return add(l1, l2);
    };
    GradCheckResult r = grad_check_full(loss_fn, ps);
    if (r.max_rel_error > 1e-4) return grad_result("grad.core_ops", s, r);
  }
  return pass_fail("grad.core_ops", true, seed, "");
}

CheckResult check_grad_sfe_block(uint64_t seed) {
  Rng rng(seed);
  const int h = 4, w = 4, cx = 5, cattn = 4, nt = 4, window = 3;
  const int hidden = std::max(window * window, nt);
  ParamStore<double> ps;
  SfeBlockParams<double> blk;
  blk.window = window;
  blk.name = "sfe";
  blk.attn.wq = &ps.create("wq", randn(rng, {cx, cattn}));
  blk.attn.wk = &ps.create("wk", randn(rng, {6, cattn}));
  blk.attn.wv = &ps.create("wv", randn(rng, {6, cattn}));
  blk.attn.wout = &ps.create("wout", randn(rng, {cattn, cx}));
  blk.conv1_w = &ps.create("c1w", randn(rng, {hidden, window * window, 3, 3}, 0.3));
  blk.conv1_b = &ps.create("c1b", randn(rng, {hidden}, 0.1));
  blk.conv2_w = &ps.create("c2w", randn(rng, {nt, hidden, 3, 3}, 0.3));
  blk.conv2_b = &ps.create("c2b", randn(rng, {nt}, 0.1));
  blk.gate.beta = &ps.create("beta", DT::scalar(0.4));
  auto& xin = ps.create("x", randn(rng, {h * w, cx}, 0.7));
  auto& yg = ps.create("yg", randn(rng, {nt, 6}, 0.7));
  auto allowed = random_mask(rng, h * w, nt);
  RegionMask mask(h * w, nt, allowed);
  DT probe = randn(rng, {h * w, cx});
  auto loss_fn = [&](Tape<double>* tape) {
    DT x = tape ? tape->param(xin) : xin.value;
    DT y = tape ? tape->param(yg) : yg.value;
    SfeResult<double> r = sfe_block(x, y, mask, blk, h, w, tape);
    return mean_all(mul(r.out, probe));
  };
  return grad_result("grad.sfe_block", seed, grad_check_full(loss_fn, ps));
}

CheckResult check_grad_gsf(uint64_t seed) {
  Rng rng(seed);
  const int c = 3, h = 4, w = 4, ct = 6, nt = 4;
  ParamStore<double> ps;
  GsfParams<double> gsf;
  gsf.num_classes = 4;
  gsf.in_w = &ps.create("in.w", randn(rng, {c + 1, c}));
  gsf.in_b = &ps.create("in.b", randn(rng, {c}, 0.1));
  gsf.alpha = &ps.create("alpha", DT::scalar(0.3));
  for (int l = 0; l < 2; ++l) {
    GsfLayerParams<double> lp;
    const std::string p = "l" + std::to_string(l);
    lp.self_attn.wq = &ps.create(p + ".s.wq", randn(rng, {c, c}));
    lp.self_attn.wk = &ps.create(p + ".s.wk", randn(rng, {c, c}));
    lp.self_attn.wv = &ps.create(p + ".s.wv", randn(rng, {c, c}));
    lp.self_attn.wout = &ps.create(p + ".s.wo", randn(rng, {c, c}));
    lp.cross_attn.wq = &ps.create(p + ".c.wq", randn(rng, {c, c}));
    lp.cross_attn.wk = &ps.create(p + ".c.wk", randn(rng, {ct, c}));
    lp.cross_attn.wv = &ps.create(p + ".c.wv", randn(rng, {ct, c}));
    lp.cross_attn.wout = &ps.create(p + ".c.wo", randn(rng, {c, c}));
    lp.w_l = &ps.create(p + ".ff", randn(rng, {c, c}));
    gsf.layers.push_back(lp);
  }
  auto& ye = ps.create("ye", randn(rng, {nt, ct}, 0.7));
  DT z = randn(rng, {c, h, w});
  LayoutMap s(h, w);
  for (auto& id : s.ids) id = static_cast<uint8_t>(rng.uniform_int(0, 3));
  DT probe = randn(rng, {c, h, w});
  auto loss_fn = [&](Tape<double>* tape) {
    DT y = tape ? tape->param(ye) : ye.value;
    DT o = gsf_forward(z, s, y, gsf, tape);
    DT out = gated_inject(z, o, tape ? tape->param(*gsf.alpha) : gsf.alpha->value);
    return mean_all(mul(out, probe));
  };
  return grad_result("grad.gsf_stack", seed, grad_check_full(loss_fn, ps));
}

CheckResult check_grad_full_model(uint64_t seed) {
  DenoiserModel<double> model(ModelConfig::debug8x8(), split_seed(seed, 1));
  model.randomize(split_seed(seed, 2), 0.05);
  Rng rng(split_seed(seed, 3));
  Scene scene = gen_scene(split_seed(seed, 4), SceneSpec{}, 32);
  const LayoutMap layout = resize_nearest(scene.layout, 8, 8);
  DT z0 = randn(rng, {3, 8, 8}, 0.5);
  DT eps = randn(rng, {3, 8, 8});
  const Schedule sched = model.schedule();
  const int t = 4;
  auto loss_fn = [&](Tape<double>* tape) {
    return model.loss(z0, layout, scene.grounded_ids, scene.caption_ids, t, eps, sched, tape);
  };
  return grad_result("grad.model_8x8", seed, grad_check_full(loss_fn, model.params()));
}

// --- property checks -----------------------------------------------------

CheckResult check_softmax_rows(uint64_t seed) {
  for (int c = 0; c < 50; ++c) {
    const uint64_t s = split_seed(seed, 11000 + static_cast<uint64_t>(c));
    Rng rng(s);
    DT x = randn(rng, {static_cast<int>(rng.uniform_int(1, 6)), static_cast<int>(rng.uniform_int(1, 6))}, 4.0);
    DT y = softmax(x, -1);
    for (int i = 0; i < y.dim(0); ++i) {
      double sum = 0;
      for (int j = 0; j < y.dim(1); ++j) {
        const double v = y.at({i, j});
        if (v < 0.0 || v > 1.0)
          return pass_fail("prop.softmax_rows", false, s, "weight outside [0,1]");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-6)
        return pass_fail("prop.softmax_rows", false, s, "row sum " + fmt(sum));
    }
  }
  return pass_fail("prop.softmax_rows", true, seed, "");
}

CheckResult check_rectification_zero_mass(uint64_t seed) {
  Rng rng(seed);
  int checked = 0;
  while (checked < 1000) {
    const int nx = static_cast<int>(rng.uniform_int(2, 10));
    const int nt = static_cast<int>(rng.uniform_int(2, 8));
    DT q = randn(rng, {nx, 6}), k = randn(rng, {nt, 6});
    auto allowed = random_mask(rng, nx, nt);
    RegionMask mask(nx, nt, allowed);
    DT wgt = rectified_attention_weights(q, k, mask);
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nt; ++j) {
        if (!allowed[static_cast<size_t>(i) * nt + j]) {
          if (wgt.at({i, j}) != 0.0)
            return pass_fail("prop.rectification_zero_mass", false, seed,
                             "nonzero masked weight " + fmt(wgt.at({i, j})));
          ++checked;
        }
      }
  }
  return pass_fail("prop.rectification_zero_mass", true, seed, "");
}

CheckResult check_rectification_singleton(uint64_t seed) {
  Rng rng(seed);
  for (int c = 0; c < 50; ++c) {
    const int nx = 6, nt = 5;
    DT q = randn(rng, {nx, 4}), k = randn(rng, {nt, 4});
    std::vector<uint8_t> allowed(static_cast<size_t>(nx) * nt, 0);
    std::vector<int> chosen(static_cast<size_t>(nx));
    for (int i = 0; i < nx; ++i) {
      chosen[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(0, nt - 1));
      allowed[static_cast<size_t>(i) * nt + chosen[static_cast<size_t>(i)]] = 1;
    }
    DT wgt = rectified_attention_weights(q, k, RegionMask(nx, nt, allowed));
    for (int i = 0; i < nx; ++i)
      if (std::abs(wgt.at({i, chosen[static_cast<size_t>(i)]}) - 1.0) > 1e-12)
        return pass_fail("prop.rectification_singleton", false, seed,
                         "singleton weight " + fmt(wgt.at({i, chosen[static_cast<size_t>(i)]})));
  }
  return pass_fail("prop.rectification_singleton", true, seed, "");
}

CheckResult check_gate_identities(uint64_t seed) {
  Rng rng(seed);
  DT z = randn(rng, {3, 6, 6});
  DT o = randn(rng, {3, 6, 6});
  DT zero = DT::scalar(0.0);
  if (!bitwise_equal(gated_inject(z, o, zero), z))
    return pass_fail("prop.gate_identities", false, seed, "gated_inject not identity at alpha=0");
  DT a = randn(rng, {5, 4}), b = randn(rng, {5, 4});
  if (!bitwise_equal(sfe_fuse(a, b, zero), a))
    return pass_fail("prop.gate_identities", false, seed, "sfe_fuse not identity at beta=0");
  // Saturation: large gate approaches a plain sum.
  DT big = DT::scalar(10.0);
  DT sum = add(a, b);
  if (max_abs_diff(sfe_fuse(a, b, big), sum) > 1e-4)
    return pass_fail("prop.gate_identities", false, seed, "tanh saturation off");
  return pass_fail("prop.gate_identities", true, seed, "");
}

CheckResult check_model_caption_invariance(uint64_t seed) {
  DenoiserModel<double> model(ModelConfig::debug8x8(), split_seed(seed, 1));  // gates at 0
  Rng rng(split_seed(seed, 2));
  Scene scene = gen_scene(split_seed(seed, 3), SceneSpec{}, 32);
  const LayoutMap layout = resize_nearest(scene.layout, 8, 8);
  DT z = randn(rng, {3, 8, 8});
  const Vocab& vocab = Vocab::builtin();
  DT bright = model.predict_eps(z, 3, layout, scene.grounded_ids,
                                vocab.tokenize({"a", "bright", "scene"}), nullptr);
  DT dark = model.predict_eps(z, 3, layout, scene.grounded_ids,
                              vocab.tokenize({"a", "dark", "scene"}), nullptr);
  DT none = model.predict_eps(z, 3, layout, scene.grounded_ids, {}, nullptr);
  if (!bitwise_equal(bright, dark) || !bitwise_equal(bright, none))
    return pass_fail("prop.model_caption_invariance", false, seed,
                     "caption changed closed-gate output");
  return pass_fail("prop.model_caption_invariance", true, seed, "");
}

CheckResult check_cfg_identities(uint64_t seed) {
  Rng rng(seed);
  DT c = randn(rng, {3, 4, 4}), u = randn(rng, {3, 4, 4});
  if (!bitwise_equal(cfg_epsilon(c, u, 0.0), u))
    return pass_fail("prop.cfg_identities", false, seed, "scale 0 is not uncond");
  if (!bitwise_equal(cfg_epsilon(c, u, 1.0), c))
    return pass_fail("prop.cfg_identities", false, seed, "scale 1 is not cond");
  DT got = cfg_epsilon(c, u, 2.0);
  double worst = 0;
  for (int64_t i = 0; i < got.numel(); ++i)
    worst = std::max(worst, std::abs(got.data()[i] - (u.data()[i] + 2.0 * (c.data()[i] - u.data()[i]))));
  if (worst > 1e-12)
    return pass_fail("prop.cfg_identities", false, seed, "affine deviation " + fmt(worst));
  return pass_fail("prop.cfg_identities", true, seed, "");
}

CheckResult check_schedule(uint64_t seed) {
  const Schedule s = make_schedule(200, 1e-4, 0.02);
  double prev = 1.0;
  for (int t = 0; t < s.steps; ++t) {
    const double bar = s.alpha_bars[static_cast<size_t>(t)];
    if (!(bar > 0.0 && bar < 1.0 && bar < prev))
      return pass_fail("prop.schedule", false, seed, "alpha_bar not strictly decreasing in (0,1)");
    prev = bar;
  }
  return pass_fail("prop.schedule", true, seed, "");
}

CheckResult check_q_sample_variance(uint64_t seed) {
  const Schedule sched = make_schedule(200, 1e-4, 0.02);
  const int t = 120;
  const double abar = sched.alpha_bars[static_cast<size_t>(t)];
  const double sigma0 = 1.7;
  Rng rng(seed);
  const int n = 10000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    DT z0 = DT::scalar(sigma0 * rng.normal());
    DT eps = DT::scalar(rng.normal());
    const double v = q_sample(z0, t, eps, sched).value();
    sum += v;
    sum2 += v * v;
  }
  const double var = (sum2 - sum * sum / n) / (n - 1);
  const double expect = abar * sigma0 * sigma0 + (1.0 - abar);
  const double tol = 3.0 * expect * std::sqrt(2.0 / (n - 1));
  if (std::abs(var - expect) > tol)
    return pass_fail("prop.q_sample_variance", false, seed,
                     "var " + fmt(var) + " expected " + fmt(expect) + " tol " + fmt(tol));
  return pass_fail("prop.q_sample_variance", true, seed, "");
}

CheckResult check_resize_properties(uint64_t seed) {
  Rng rng(seed);
  for (int c = 0; c < 50; ++c) {
    LayoutMap m(static_cast<int>(rng.uniform_int(1, 10)), static_cast<int>(rng.uniform_int(1, 10)));
    for (auto& id : m.ids) id = static_cast<uint8_t>(rng.uniform_int(0, 3));
    if (!(resize_nearest(m, m.h, m.w) == m))
      return pass_fail("prop.resize", false, seed, "not idempotent at matching size");
    LayoutMap up = resize_nearest(m, m.h * 2 + 1, m.w * 2 + 1);
    for (uint8_t id : up.ids) {
      bool found = false;
      for (uint8_t src : m.ids) found = found || src == id;
      if (!found) return pass_fail("prop.resize", false, seed, "label set grew");
    }
  }
  return pass_fail("prop.resize", true, seed, "");
}

CheckResult check_forward_determinism(uint64_t seed) {
  DenoiserModel<double> model(ModelConfig::debug8x8(), split_seed(seed, 1));
  model.randomize(split_seed(seed, 2), 0.05);
  Rng rng(split_seed(seed, 3));
  Scene scene = gen_scene(split_seed(seed, 4), SceneSpec{}, 32);
  const LayoutMap layout = resize_nearest(scene.layout, 8, 8);
  DT z = randn(rng, {3, 8, 8});
  DT a = model.predict_eps(z, 2, layout, scene.grounded_ids, scene.caption_ids, nullptr);
  DT b = model.predict_eps(z, 2, layout, scene.grounded_ids, scene.caption_ids, nullptr);
  if (!bitwise_equal(a, b))
    return pass_fail("prop.forward_determinism", false, seed, "repeated forward differs");
  GuidanceConfig g;
  g.scale = 2.0;
  DT s1 = model.sample(layout, scene.grounded_ids, scene.caption_ids, g, split_seed(seed, 5));
  DT s2 = model.sample(layout, scene.grounded_ids, scene.caption_ids, g, split_seed(seed, 5));
  if (!bitwise_equal(s1, s2))
    return pass_fail("prop.forward_determinism", false, seed, "repeated sampling differs");
  return pass_fail("prop.forward_determinism", true, seed, "");
}

CheckResult check_untouched_param_grad(uint64_t seed) {
  Rng rng(seed);
  ParamStore<double> ps;
  auto& used = ps.create("used", randn(rng, {3, 3}));
  auto& unused = ps.create("unused", randn(rng, {3, 3}));
  ps.zero_grad();
  Tape<double> tape;
  DT loss = mean_all(mul(tape.param(used), tape.param(used)));
  tape.backward(loss);
  for (double g : unused.grad)
    if (g != 0.0)
      return pass_fail("prop.untouched_param_grad", false, seed, "untouched grad nonzero");
  return pass_fail("prop.untouched_param_grad", true, seed, "");
}

}  // namespace

std::vector<CheckResult> oracle_suite_with(uint64_t seed, const SoftmaxFn& softmax_candidate) {
  return {check_matmul_oracle(seed),         check_softmax_oracle(seed, softmax_candidate),
          check_conv_oracle(seed),           check_ss_oracle(seed),
          check_scaled_attention_oracle(seed), check_rectified_oracle(seed),
          check_expand_oracle(seed),         check_sca_oracle(seed),
          check_resize_oracle(seed)};
}

std::vector<CheckResult> oracle_suite(uint64_t seed) {
  return oracle_suite_with(seed, [](const Tensor<double>& x, int axis) { return softmax(x, axis); });
}

std::vector<CheckResult> grad_suite(uint64_t seed) {
  return {check_grad_core_ops(seed), check_grad_sfe_block(seed), check_grad_gsf(seed),
          check_grad_full_model(seed)};
}

std::vector<CheckResult> property_suite(uint64_t seed) {
  return {check_softmax_rows(seed),
          check_rectification_zero_mass(seed),
          check_rectification_singleton(seed),
          check_gate_identities(seed),
          check_model_caption_invariance(seed),
          check_cfg_identities(seed),
          check_schedule(seed),
          check_q_sample_variance(seed),
          check_resize_properties(seed),
          check_forward_determinism(seed),
          check_untouched_param_grad(seed)};
}

std::vector<CheckResult> run_suite(const std::string& suite, uint64_t seed) {
  if (suite == "oracles") return oracle_suite(seed);
  if (suite == "grads") return grad_suite(seed);
  if (suite == "properties") return property_suite(seed);
  if (suite == "all") {
    std::vector<CheckResult> all = oracle_suite(seed);
    for (auto& r : grad_suite(seed)) all.push_back(std::move(r));
    for (auto& r : property_suite(seed)) all.push_back(std::move(r));
    return all;
  }
  throw ParameterError("unknown suite '" + suite + "' (expected oracles|grads|properties|all)");
}

bool all_pass(const std::vector<CheckResult>& results) {
  for (const auto& r : results)
    if (!r.pass) return false;
  return true;
}

nlohmann::json report_json(const std::string& suite, uint64_t seed,
                           const std::vector<CheckResult>& results) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& r : results)
    checks.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}, {"seed", r.seed}});
  return {{"suite", suite},
          {"seed", seed},
          {"pass", all_pass(results)},
          {"checks", checks}};
}

}  // namespace cohdiff::verify

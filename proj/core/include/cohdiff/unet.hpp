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

#ifndef COHDIFF_UNET_HPP_
#define COHDIFF_UNET_HPP_

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cohdiff/attention.hpp"
#include "cohdiff/checkpoint.hpp"
#include "cohdiff/diffusion.hpp"
#include "cohdiff/gsf.hpp"
#include "cohdiff/layout.hpp"
#include "cohdiff/nn_ops.hpp"
#include "cohdiff/rng.hpp"
#include "cohdiff/vocab.hpp"

namespace cohdiff {

struct ModelConfig {
  int image_size = 32;
  int image_channels = 3;
  int base_channels = 32;
  int depth = 2;            // down/up levels; attention sits at the two lowest resolutions
  int window = 3;           // self-similarity neighborhood length k
  int gsf_layers = 2;       // L
  int n_tokens = 8;         // N_t slots including padding
  int token_channels = 32;  // C_t
  int attn_channels = 32;   // shared attention width C
  int temb_channels = 64;
  int timesteps = 200;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  bool gsf_positional = false;
  std::vector<int> global_token_slots;  // RCA slots allowed everywhere (off by default)

  void validate() const {
    if (image_size < 1 || image_size % (1 << depth) != 0)
      throw ParameterError("ModelConfig: image_size must be divisible by 2^depth");
    if (depth < 1 || depth > 4) throw ParameterError("ModelConfig: depth must be in [1,4]");
    if (window < 1 || window % 2 == 0) throw ParameterError("ModelConfig: window must be odd");
    if (window > 2 * (image_size >> depth) + 1)
      throw ParameterError("ModelConfig: window exceeds the lowest-resolution bound");
    if (gsf_layers < 1) throw ParameterError("ModelConfig: gsf_layers must be >= 1");
    if (n_tokens < 1) throw ParameterError("ModelConfig: n_tokens must be >= 1");
    if (temb_channels < 2 || temb_channels % 2 != 0)
      throw ParameterError("ModelConfig: temb_channels must be even");
    if (timesteps < 1) throw ParameterError("ModelConfig: timesteps must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
      throw ParameterError("ModelConfig: requires 0 < beta_start <= beta_end < 1");
  }

  nlohmann::json to_json() const {
    return {{"image_size", image_size},
            {"image_channels", image_channels},
            {"base_channels", base_channels},
            {"depth", depth},
            {"window", window},
            {"gsf_layers", gsf_layers},
            {"n_tokens", n_tokens},
            {"token_channels", token_channels},
            {"attn_channels", attn_channels},
            {"temb_channels", temb_channels},
            {"timesteps", timesteps},
            {"beta_start", beta_start},
            {"beta_end", beta_end},
            {"gsf_positional", gsf_positional},
            {"global_token_slots", global_token_slots}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.image_size = j.value("image_size", c.image_size);
    c.image_channels = j.value("image_channels", c.image_channels);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.depth = j.value("depth", c.depth);
    c.window = j.value("window", c.window);
    c.gsf_layers = j.value("gsf_layers", c.gsf_layers);
    c.n_tokens = j.value("n_tokens", c.n_tokens);
    c.token_channels = j.value("token_channels", c.token_channels);
    c.attn_channels = j.value("attn_channels", c.attn_channels);
    c.temb_channels = j.value("temb_channels", c.temb_channels);
    c.timesteps = j.value("timesteps", c.timesteps);
    c.beta_start = j.value("beta_start", c.beta_start);
    c.beta_end = j.value("beta_end", c.beta_end);
    c.gsf_positional = j.value("gsf_positional", c.gsf_positional);
    c.global_token_slots = j.value("global_token_slots", c.global_token_slots);
    c.validate();
    return c;
  }

  /// Tiny 8x8 configuration used by the full-model gradient checks.
  static ModelConfig debug8x8() {
    ModelConfig c;
    c.image_size = 8;
    c.base_channels = 6;
    c.n_tokens = 6;
    c.token_channels = 8;
    c.attn_channels = 8;
    c.temb_channels = 16;
    c.timesteps = 10;
    return c;
  }
};

template <class S>
struct ResBlockParams {
  Parameter<S>* conv1_w = nullptr;
  Parameter<S>* conv1_b = nullptr;
  Parameter<S>* temb_w = nullptr;
  Parameter<S>* temb_b = nullptr;
  Parameter<S>* conv2_w = nullptr;
  Parameter<S>* conv2_b = nullptr;
  Parameter<S>* skip_w = nullptr;  // 1x1, only when in/out widths differ
  Parameter<S>* skip_b = nullptr;
};

template <class S>
struct SfeCapture {
  std::string name;
  int h = 0;
  int w = 0;
  Tensor<S> ss;  // [k^2, h, w]
  Tensor<S> m;   // [N_t, h, w]
};

template <class S>
struct ForwardTrace {
  std::vector<SfeCapture<S>> sfe;
};

/// The conditioned denoiser: GSF injection at the input resolution followed
/// by a small U-Net whose attention sites are SFE blocks. Forward passes are
/// pure; parameters change only via the optimizer or checkpoint loads.
template <class S>
class DenoiserModel {
 public:
  DenoiserModel(ModelConfig cfg, uint64_t init_seed)
      : cfg_(std::move(cfg)), vocab_(&Vocab::builtin()), init_seed_(init_seed) {
    cfg_.validate();
    build(init_seed);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<S>& params() { return store_; }
  const ParamStore<S>& params() const { return store_; }
  const Vocab& vocab() const { return *vocab_; }
  uint64_t init_seed() const { return init_seed_; }

  Schedule schedule() const {
    return make_schedule(cfg_.timesteps, cfg_.beta_start, cfg_.beta_end);
  }

  double alpha_value() const { return static_cast<double>(gsf_.alpha->value.value()); }

  double mean_tanh_beta() const {
    double acc = 0;
    for (const auto* blk : sfe_blocks_)
      acc += std::tanh(static_cast<double>(blk->gate.beta->value.value()));
    return sfe_blocks_.empty() ? 0.0 : acc / static_cast<double>(sfe_blocks_.size());
  }

  int sfe_block_count() const { return static_cast<int>(sfe_blocks_.size()); }

  /// Pads ids to the N_t slots; an empty sequence becomes the null-caption
  /// marker followed by padding.
  std::vector<int> pad_token_ids(const std::vector<int>& ids) const {
    if (static_cast<int>(ids.size()) > cfg_.n_tokens)
      throw VocabularyError("token sequence longer than the " + std::to_string(cfg_.n_tokens) +
                            " available slots");
    std::vector<int> out = ids.empty() ? std::vector<int>{vocab_->null_id()} : ids;
    out.resize(static_cast<size_t>(cfg_.n_tokens), vocab_->pad_id());
    return out;
  }

  /// Token embedding lookup, padded to [N_t, C_t].
  Tensor<S> embed_tokens(const std::vector<int>& ids, Tape<S>* tape) {
    Tensor<S> table = tape ? tape->param(*token_table_) : token_table_->value;
    return embed_rows(table, pad_token_ids(ids));
  }

  /// Full conditioned forward pass; output shape equals z_t's.
  Tensor<S> predict_eps(const Tensor<S>& z_t, int t, const LayoutMap& layout,
                        const std::vector<int>& grounded_ids,
                        const std::vector<int>& caption_ids, Tape<S>* tape,
                        ForwardTrace<S>* trace = nullptr) {
    if (z_t.ndim() != 3 || z_t.dim(0) != cfg_.image_channels || z_t.dim(1) != cfg_.image_size ||
        z_t.dim(2) != cfg_.image_size)
      throw DimensionError("predict_eps: z_t does not match the model grid");
    if (t < 0 || t >= cfg_.timesteps) throw ParameterError("predict_eps: timestep out of range");
    if (layout.h != cfg_.image_size || layout.w != cfg_.image_size)
      throw DimensionError("predict_eps: layout must be resized to the model grid");

    const std::vector<int> grounded_slots = pad_token_ids(grounded_ids);
    Tensor<S> y_e = embed_tokens(caption_ids, tape);

    // GSF fusion and gated injection at the input resolution.
    Tensor<S> o_l = gsf_forward(z_t, layout, y_e, gsf_, tape);
    Tensor<S> x = gated_inject(z_t, o_l, use(tape, *gsf_.alpha));

    // Timestep embedding MLP.
    Tensor<S> temb = sinusoidal_embedding(t);
    temb = add_row_bias(matmul(temb, use(tape, *temb_fc1_w_)), use(tape, *temb_fc1_b_));
    temb = relu(temb);
    temb = add_row_bias(matmul(temb, use(tape, *temb_fc2_w_)), use(tape, *temb_fc2_b_));

    x = conv2d(x, use(tape, *conv_in_w_), use(tape, *conv_in_b_), Padding::kSame);

    std::vector<Tensor<S>> skips;
    int res = cfg_.image_size;
    for (int l = 0; l < cfg_.depth; ++l) {
      x = res_block(x, down_[static_cast<size_t>(l)], temb, tape);
      if (l >= cfg_.depth - 1)
        x = apply_sfe(x, *down_sfe_, layout, grounded_slots, res, tape, trace);
      skips.push_back(x);
      x = avgpool2x2(x);
      res /= 2;
    }

    x = res_block(x, mid_, temb, tape);
    x = apply_sfe(x, *mid_sfe_, layout, grounded_slots, res, tape, trace);

    for (int l = cfg_.depth - 1; l >= 0; --l) {
      x = upsample2x(x);
      res *= 2;
      x = concat_channels(x, skips[static_cast<size_t>(l)]);
      x = res_block(x, up_[static_cast<size_t>(l)], temb, tape);
      if (l == cfg_.depth - 1)
        x = apply_sfe(x, *up_sfe_, layout, grounded_slots, res, tape, trace);
    }

    return conv2d(x, use(tape, *conv_out_w_), use(tape, *conv_out_b_), Padding::kSame);
  }

  /// Training objective for one example.
  Tensor<S> loss(const Tensor<S>& z0, const LayoutMap& layout,
                 const std::vector<int>& grounded_ids, const std::vector<int>& caption_ids,
                 int t, const Tensor<S>& eps, const Schedule& sched, Tape<S>* tape) {
    return denoise_loss(
        [&](const Tensor<S>& z_t, int step) {
          return predict_eps(z_t, step, layout, grounded_ids, caption_ids, tape);
        },
        z0, t, eps, sched);
  }

  /// Classifier-free-guided ancestral sampling (pure given the seed).
  Tensor<S> sample(const LayoutMap& layout, const std::vector<int>& grounded_ids,
                   const std::vector<int>& caption_ids, const GuidanceConfig& guidance,
                   uint64_t seed, bool deterministic = false) {
    const Schedule sched = schedule();
    const std::vector<int> null_caption;  // routed to the null embedding
    return sample_loop<S>(
        [&](const Tensor<S>& z, int t, bool conditional) {
          return predict_eps(z, t, layout, grounded_ids,
                             conditional ? caption_ids : null_caption, nullptr);
        },
        {cfg_.image_channels, cfg_.image_size, cfg_.image_size}, sched, guidance, seed,
        deterministic);
  }

  void save(const std::string& path, int64_t step) const {
    save_checkpoint(path, store_, cfg_.to_json(), step);
  }

  /// Loads parameters from a checkpoint saved with a matching config.
  int64_t load(const std::string& path) {
    const CheckpointHeader meta = load_checkpoint(path, store_);
    return meta.step;
  }

  static std::unique_ptr<DenoiserModel<S>> from_checkpoint(const std::string& path,
                                                           int64_t* step_out = nullptr) {
    const CheckpointHeader meta = load_checkpoint_meta(path);
    auto model = std::make_unique<DenoiserModel<S>>(ModelConfig::from_json(meta.config), 0);
    const int64_t step = model->load(path);
    if (step_out) *step_out = step;
    return model;
  }

  /// Adds seeded Gaussian noise to every parameter (gradient-check support:
  /// the zero-initialized gates and output layer would otherwise hide whole
  /// subgraphs from the check).
  void randomize(uint64_t seed, double sigma) {
    Rng rng(seed);
    for (size_t i = 0; i < store_.size(); ++i) {
      S* v = store_[i].value.mutable_data();
      for (int64_t j = 0; j < store_[i].value.numel(); ++j)
        v[j] += static_cast<S>(sigma * rng.normal());
    }
  }

  const GsfParams<S>& gsf() const { return gsf_; }
  const std::vector<SfeBlockParams<S>*>& sfe_blocks() const { return sfe_blocks_; }

 private:
  static Tensor<S> use(Tape<S>* tape, Parameter<S>& p) { return tape ? tape->param(p) : p.value; }

  Tensor<S> sinusoidal_embedding(int t) const {
    const int half = cfg_.temb_channels / 2;
    Tensor<S> out({1, cfg_.temb_channels});
    S* po = out.mutable_data();
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
      po[i] = static_cast<S>(std::sin(t * freq));
      po[half + i] = static_cast<S>(std::cos(t * freq));
    }
    return out;
  }

  Tensor<S> res_block(const Tensor<S>& x, ResBlockParams<S>& p, const Tensor<S>& temb,
                      Tape<S>* tape) {
    Tensor<S> h = conv2d(x, use(tape, *p.conv1_w), use(tape, *p.conv1_b), Padding::kSame);
    Tensor<S> tproj = add_row_bias(matmul(temb, use(tape, *p.temb_w)), use(tape, *p.temb_b));
    h = add_chw_bias(h, reshape(tproj, {h.dim(0)}));
    h = relu(h);
    h = conv2d(h, use(tape, *p.conv2_w), use(tape, *p.conv2_b), Padding::kSame);
    Tensor<S> sk = p.skip_w ? conv2d(x, use(tape, *p.skip_w), use(tape, *p.skip_b), Padding::kSame)
                            : x;
    return add(h, sk);
  }

  Tensor<S> apply_sfe(const Tensor<S>& x, SfeBlockParams<S>& blk, const LayoutMap& layout,
                      const std::vector<int>& grounded_slots, int res, Tape<S>* tape,
                      ForwardTrace<S>* trace) {
    const LayoutMap local = resize_nearest(layout, res, res);
    const RegionMask mask = build_region_mask(local, grounded_slots, vocab_->class_words(),
                                              cfg_.global_token_slots);
    Tensor<S> y_g = embed_rows(tape ? tape->param(*token_table_) : token_table_->value,
                               grounded_slots);
    Tensor<S> x_nc = chw_to_nc(x);
    SfeResult<S> r = sfe_block(x_nc, y_g, mask, blk, res, res, tape);
    if (trace)
      trace->sfe.push_back(SfeCapture<S>{blk.name, res, res, r.maps.ss.detached(), r.maps.m.detached()});
    return nc_to_chw(add(r.out, x_nc), res, res);
  }

  Parameter<S>& normal_param(const std::string& name, Shape shape, double sigma) {
    Tensor<S> t(shape);
    init_rng_->fill_normal(t.mutable_data(), t.numel(), sigma);
    return store_.create(name, std::move(t));
  }

  Parameter<S>& zero_param(const std::string& name, Shape shape) {
    return store_.create(name, Tensor<S>(std::move(shape)));
  }

  Parameter<S>& linear_w(const std::string& name, int in, int out) {
    return normal_param(name, {in, out}, 1.0 / std::sqrt(static_cast<double>(in)));
  }

  Parameter<S>& conv_w(const std::string& name, int co, int ci, int k) {
    return normal_param(name, {co, ci, k, k}, std::sqrt(2.0 / (ci * k * k)));
  }

  AttnParams<S> make_attn(const std::string& prefix, int q_in, int kv_in, int width, int out) {
    AttnParams<S> a;
    a.wq = &linear_w(prefix + ".wq", q_in, width);
    a.wk = &linear_w(prefix + ".wk", kv_in, width);
    a.wv = &linear_w(prefix + ".wv", kv_in, width);
    a.wout = &linear_w(prefix + ".wout", width, out);
    return a;
  }

  ResBlockParams<S> make_res(const std::string& prefix, int cin, int cout) {
    ResBlockParams<S> r;
    r.conv1_w = &conv_w(prefix + ".conv1.w", cout, cin, 3);
    r.conv1_b = &zero_param(prefix + ".conv1.b", {cout});
    r.temb_w = &linear_w(prefix + ".temb.w", cfg_.temb_channels, cout);
    r.temb_b = &zero_param(prefix + ".temb.b", {cout});
    // Zero-initialized second conv: each block starts as its skip path,
    // which keeps activation variance flat through the stack.
    r.conv2_w = &zero_param(prefix + ".conv2.w", {cout, cout, 3, 3});
    r.conv2_b = &zero_param(prefix + ".conv2.b", {cout});
    if (cin != cout) {
      r.skip_w = &normal_param(prefix + ".skip.w", {cout, cin, 1, 1},
                               1.0 / std::sqrt(static_cast<double>(cin)));
      r.skip_b = &zero_param(prefix + ".skip.b", {cout});
    }
    return r;
  }

  std::unique_ptr<SfeBlockParams<S>> make_sfe(const std::string& prefix, int block_channels) {
    auto blk = std::make_unique<SfeBlockParams<S>>();
    blk->name = prefix;
    blk->window = cfg_.window;
    blk->attn = make_attn(prefix, block_channels, cfg_.token_channels, cfg_.attn_channels,
                          block_channels);
    const int k2 = cfg_.window * cfg_.window;
    const int hidden = std::max(k2, cfg_.n_tokens);
    blk->conv1_w = &conv_w(prefix + ".conv1.w", hidden, k2, 3);
    blk->conv1_b = &zero_param(prefix + ".conv1.b", {hidden});
    blk->conv2_w = &conv_w(prefix + ".conv2.w", cfg_.n_tokens, hidden, 3);
    blk->conv2_b = &zero_param(prefix + ".conv2.b", {cfg_.n_tokens});
    blk->gate.beta = &zero_param(prefix + ".beta", {1});
    sfe_blocks_.push_back(blk.get());
    return blk;
  }

  void build(uint64_t seed) {
    Rng rng(seed);
    init_rng_ = &rng;

    token_table_ = &normal_param("embed.table", {vocab_->size(), cfg_.token_channels}, 0.5);

    // GSF operates at the image width C = image_channels.
    const int c = cfg_.image_channels;
    gsf_.in_w = &linear_w("gsf.in.w", c + 1, c);
    gsf_.in_b = &zero_param("gsf.in.b", {c});
    gsf_.alpha = &zero_param("gsf.alpha", {1});
    gsf_.num_classes = vocab_->num_classes();
    gsf_.positional = cfg_.gsf_positional;
    for (int l = 0; l < cfg_.gsf_layers; ++l) {
      const std::string p = "gsf.l" + std::to_string(l);
      GsfLayerParams<S> lp;
      lp.self_attn = make_attn(p + ".self", c, c, c, c);
      lp.cross_attn = make_attn(p + ".cross", c, cfg_.token_channels, c, c);
      lp.w_l = &linear_w(p + ".ff", c, c);
      gsf_.layers.push_back(lp);
    }

    temb_fc1_w_ = &linear_w("temb.fc1.w", cfg_.temb_channels, cfg_.temb_channels);
    temb_fc1_b_ = &zero_param("temb.fc1.b", {cfg_.temb_channels});
    temb_fc2_w_ = &linear_w("temb.fc2.w", cfg_.temb_channels, cfg_.temb_channels);
    temb_fc2_b_ = &zero_param("temb.fc2.b", {cfg_.temb_channels});

    // Channel plan: base at the input level, twice that below.
    const auto ch = [&](int level) {
      return level == 0 ? cfg_.base_channels : 2 * cfg_.base_channels;
    };

    conv_in_w_ = &conv_w("unet.in.w", ch(0), cfg_.image_channels, 3);
    conv_in_b_ = &zero_param("unet.in.b", {ch(0)});

    for (int l = 0; l < cfg_.depth; ++l) {
      const int cin = l == 0 ? ch(0) : ch(l - 1);
      down_.push_back(make_res("unet.down" + std::to_string(l), cin, ch(l)));
      if (l >= cfg_.depth - 1) down_sfe_ = make_sfe("unet.down" + std::to_string(l) + ".sfe", ch(l));
    }
    mid_ = make_res("unet.mid", ch(cfg_.depth - 1), ch(cfg_.depth));
    mid_sfe_ = make_sfe("unet.mid.sfe", ch(cfg_.depth));
    for (int l = 0; l < cfg_.depth; ++l) {
      const int cin = ch(l + 1) + ch(l);
      up_.push_back(make_res("unet.up" + std::to_string(l), cin, ch(l)));
      if (l == cfg_.depth - 1) up_sfe_ = make_sfe("unet.up" + std::to_string(l) + ".sfe", ch(l));
    }

    // Zero-initialized head: the untrained model predicts zero noise.
    conv_out_w_ = &zero_param("unet.out.w", {cfg_.image_channels, ch(0), 3, 3});
    conv_out_b_ = &zero_param("unet.out.b", {cfg_.image_channels});

    init_rng_ = nullptr;
  }

  ModelConfig cfg_;
  const Vocab* vocab_;
  uint64_t init_seed_;
  ParamStore<S> store_;
  Rng* init_rng_ = nullptr;

  Parameter<S>* token_table_ = nullptr;
  GsfParams<S> gsf_;
  Parameter<S>* temb_fc1_w_ = nullptr;
  Parameter<S>* temb_fc1_b_ = nullptr;
  Parameter<S>* temb_fc2_w_ = nullptr;
  Parameter<S>* temb_fc2_b_ = nullptr;
  Parameter<S>* conv_in_w_ = nullptr;
  Parameter<S>* conv_in_b_ = nullptr;
  std::vector<ResBlockParams<S>> down_;
  ResBlockParams<S> mid_;
  std::vector<ResBlockParams<S>> up_;
  Parameter<S>* conv_out_w_ = nullptr;
  Parameter<S>* conv_out_b_ = nullptr;
  std::unique_ptr<SfeBlockParams<S>> down_sfe_;
  std::unique_ptr<SfeBlockParams<S>> mid_sfe_;
  std::unique_ptr<SfeBlockParams<S>> up_sfe_;
  std::vector<SfeBlockParams<S>*> sfe_blocks_;
};

}  // namespace cohdiff

#endif  // COHDIFF_UNET_HPP_

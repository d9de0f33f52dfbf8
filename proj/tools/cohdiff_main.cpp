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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cohdiff/checkpoint.hpp"
#include "cohdiff/diffusion.hpp"
#include "cohdiff/image_io.hpp"
#include "cohdiff/scene.hpp"
#include "cohdiff/trainer.hpp"
#include "cohdiff/unet.hpp"
#include "cohdiff/verify.hpp"
#include "cohdiff/vocab.hpp"

namespace {

using nlohmann::json;
using namespace cohdiff;

constexpr int kExitOk = 0;
constexpr int kExitContract = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text + ",") {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) words.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  return words;
}

std::string default_out_dir() {
  const char* env = std::getenv("COHDIFF_OUT_DIR");
  return env ? env : "out";
}

void log_run(const std::string& command, const json& resolved) {
  json line = {{"command", command}, {"config", resolved}};
  std::cout << line.dump() << "\n";
}

std::vector<std::pair<SceneSpec, double>> parse_mix(const std::string& text) {
  std::vector<std::pair<SceneSpec, double>> mix;
  for (const auto& part : split_words(text)) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ParameterError("mix entry '" + part + "' is not name=prob");
    SceneSpec spec;
    spec.adjacency = adjacency_from_string(part.substr(0, eq));
    mix.emplace_back(spec, std::stod(part.substr(eq + 1)));
  }
  return mix;
}

json mix_to_json(const std::vector<std::pair<SceneSpec, double>>& mix) {
  json j = json::object();
  for (const auto& [spec, p] : mix) j[to_string(spec.adjacency)] = p;
  return j;
}

int cmd_gen_data(uint64_t seed, int n, std::string out, const std::string& mix_text, int size) {
  if (out.empty()) out = default_out_dir() + "/dataset";
  const auto mix = parse_mix(mix_text);
  log_run("gen-data", {{"seed", seed}, {"n", n}, {"out", out}, {"mix", mix_to_json(mix)}, {"size", size}});

  const std::vector<Scene> scenes = dataset_stream(seed, n, mix, size);
  std::filesystem::create_directories(out);
  json manifest = {{"seed", seed}, {"n", n}, {"size", size}, {"mix", mix_to_json(mix)}};
  json names = json::array();
  for (size_t i = 0; i < scenes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04zu", i);
    dump_scene(out + "/" + name, scenes[i]);
    names.push_back(name);
  }
  manifest["scenes"] = names;
  std::ofstream f(out + "/manifest.json", std::ios::trunc);
  if (!f) throw IoError("cannot write manifest in " + out);
  f << manifest.dump(2) << "\n";
  std::cout << "wrote " << scenes.size() << " scenes to " << out << "\n";
  return kExitOk;
}

std::vector<Scene> load_dataset(const std::string& dir) {
  std::ifstream f(dir + "/manifest.json");
  if (!f) throw IoError("missing manifest.json in " + dir);
  json manifest;
  f >> manifest;
  std::vector<Scene> scenes;
  for (const auto& name : manifest.at("scenes"))
    scenes.push_back(load_scene(dir + "/" + name.get<std::string>()));
  if (scenes.empty()) throw IoError("dataset is empty: " + dir);
  return scenes;
}

ModelConfig config_from_file(const std::string& path) {
  if (path.empty()) return ModelConfig{};
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ParameterError("bad config JSON: " + std::string(e.what()));
  }
  return ModelConfig::from_json(j);
}

int cmd_train(const std::string& config_path, const std::string& data, int64_t steps,
              std::string out, uint64_t seed, int batch, double lr, int64_t ckpt_every,
              int threads, double uncond_drop) {
  if (out.empty()) out = default_out_dir() + "/train";
  const ModelConfig cfg = config_from_file(config_path);
  TrainOptions opts;
  opts.steps = steps;
  opts.batch = batch;
  opts.lr = lr;
  opts.seed = seed;
  opts.ckpt_every = ckpt_every;
  opts.out_dir = out;
  opts.threads = threads;
  opts.uncond_drop = uncond_drop;

  json resolved = cfg.to_json();
  resolved["seed"] = seed;
  resolved["steps"] = steps;
  resolved["batch"] = batch;
  resolved["lr"] = lr;
  resolved["ckpt_every"] = ckpt_every;
  resolved["threads"] = threads;
  resolved["uncond_drop"] = uncond_drop;
  resolved["data"] = data;
  resolved["out"] = out;
  log_run("train", resolved);

  const std::vector<Scene> scenes = load_dataset(data);
  DenoiserModel<float> model(cfg, seed);

  std::filesystem::create_directories(out);
  std::ofstream metrics(out + "/metrics.csv", std::ios::trunc);
  if (!metrics) throw IoError("cannot write metrics.csv in " + out);
  metrics << kMetricsHeader;
  train(model, scenes, opts, [&](const StepMetrics& m) {
    metrics << format_metrics_row(m);
    if ((m.step + 1) % 500 == 0)
      std::cout << "step " << (m.step + 1) << " loss " << m.loss << "\n";
  });
  if (!metrics) throw IoError("metrics write failed in " + out);
  std::cout << "checkpoint: " << out << "/checkpoint.ckpt\n";
  return kExitOk;
}

Attribute attribute_from_caption(const std::vector<std::string>& caption) {
  for (const auto& w : caption)
    if (w == "dark") return Attribute::kDark;
  return Attribute::kBright;
}

int cmd_sample(const std::string& ckpt, const std::string& layout_path, const std::string& text,
               const std::string& caption_text, double scale, uint64_t seed, std::string out,
               bool deterministic, int count) {
  if (out.empty()) out = default_out_dir() + "/sample.png";
  log_run("sample", {{"ckpt", ckpt},
                     {"layout", layout_path},
                     {"text", text},
                     {"caption", caption_text},
                     {"scale", scale},
                     {"seed", seed},
                     {"out", out},
                     {"deterministic", deterministic},
                     {"count", count}});

  auto model = DenoiserModel<float>::from_checkpoint(ckpt);
  const LayoutMap layout = read_pgm(layout_path);
  if (layout.h != model->config().image_size || layout.w != model->config().image_size)
    throw ParameterError("layout is " + std::to_string(layout.w) + "x" + std::to_string(layout.h) +
                         " but the model expects " + std::to_string(model->config().image_size));
  const Vocab& vocab = Vocab::builtin();
  const auto grounded_words = split_words(text);
  const auto caption_words = split_words(caption_text);
  const std::vector<int> grounded = vocab.tokenize(grounded_words);
  const std::vector<int> caption = vocab.tokenize(caption_words);
  GuidanceConfig guidance;
  guidance.scale = scale;

  const Attribute attr = attribute_from_caption(caption_words);
  for (int i = 0; i < count; ++i) {
    const uint64_t s = count == 1 ? seed : split_seed(seed, static_cast<uint64_t>(i));
    Tensor<float> img = model->sample(layout, grounded, caption, guidance, s, deterministic);
    std::string path = out;
    if (count > 1) {
      std::filesystem::create_directories(out);
      path = out + "/sample-" + std::to_string(s) + ".png";
    } else if (out.find('/') != std::string::npos) {
      std::filesystem::create_directories(std::filesystem::path(out).parent_path().string());
    }
    write_png(path, tensor_to_rgb8(img));

    const auto per_class = per_class_agreement(img, layout, attr);
    json scores = json::object();
    for (size_t c = 0; c < per_class.size(); ++c)
      if (per_class[c] >= 0.0) scores[vocab.word(vocab.class_words()[c])] = per_class[c];
    json line = {{"image", path},
                 {"seed", s},
                 {"palette_match", palette_class_agreement(img, layout, attr)},
                 {"per_region", scores}};
    std::cout << line.dump() << "\n";
  }
  return kExitOk;
}

int cmd_viz_ss(const std::string& ckpt, const std::string& layout_path, const std::string& text,
               int step, std::string out, uint64_t seed) {
  if (out.empty()) out = default_out_dir() + "/viz";
  log_run("viz-ss", {{"ckpt", ckpt},
                     {"layout", layout_path},
                     {"text", text},
                     {"step", step},
                     {"out", out},
                     {"seed", seed}});

  auto model = DenoiserModel<float>::from_checkpoint(ckpt);
  const LayoutMap layout = read_pgm(layout_path);
  if (layout.h != model->config().image_size || layout.w != model->config().image_size)
    throw ParameterError("layout size does not match the model grid");
  const Vocab& vocab = Vocab::builtin();
  const std::vector<int> grounded = vocab.tokenize(split_words(text));

  Rng rng(seed);
  Tensor<float> z({model->config().image_channels, model->config().image_size,
                   model->config().image_size});
  rng.fill_normal(z.mutable_data(), z.numel());

  ForwardTrace<float> trace;
  model->predict_eps(z, step, layout, grounded, {}, nullptr, &trace);

  std::filesystem::create_directories(out);
  for (const auto& cap : trace.sfe) {
    // Mean over token channels, then min-max normalization to [0,1].
    const int64_t plane = static_cast<int64_t>(cap.h) * cap.w;
    std::vector<double> heat(static_cast<size_t>(plane), 0.0);
    const int nt = cap.m.dim(0);
    for (int c = 0; c < nt; ++c)
      for (int64_t p = 0; p < plane; ++p)
        heat[static_cast<size_t>(p)] += static_cast<double>(cap.m.data()[c * plane + p]);
    double lo = heat[0], hi = heat[0];
    for (double v : heat) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    for (double& v : heat) v = (v - lo) / span;
    std::string name = cap.name;
    for (char& ch : name)
      if (ch == '.') ch = '_';
    const std::string path = out + "/ss-" + name + ".png";
    write_png(path, gray_to_image(heat, cap.h, cap.w));
    std::cout << path << "\n";
  }
  std::cout << "blocks: " << trace.sfe.size() << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& suite, uint64_t seed, const std::string& report_path) {
  log_run("verify", {{"suite", suite}, {"seed", seed}, {"report", report_path}});
  const auto results = verify::run_suite(suite, seed);
  const json report = verify::report_json(suite, seed, results);
  if (!report_path.empty()) {
    std::ofstream f(report_path, std::ios::trunc);
    if (!f) throw IoError("cannot write report: " + report_path);
    f << report.dump(2) << "\n";
  }
  for (const auto& r : results)
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name
              << (r.pass ? "" : "  (" + r.detail + ", seed " + std::to_string(r.seed) + ")")
              << "\n";
  std::cout << report.dump() << "\n";
  return verify::all_pass(results) ? kExitOk : kExitContract;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layout-conditioned toy diffusion with coherence attention"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a procedural scene dataset");
  uint64_t gen_seed = 0;
  int gen_n = 16;
  std::string gen_out;
  std::string gen_mix = "touching=0.5,apart=0.5";
  int gen_size = 32;
  gen->add_option("--seed", gen_seed, "Master seed");
  gen->add_option("--n", gen_n, "Number of scenes")->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "Output directory (default $COHDIFF_OUT_DIR/dataset)");
  gen->add_option("--mix", gen_mix, "Adjacency mix, e.g. touching=0.5,apart=0.5");
  gen->add_option("--size", gen_size, "Scene resolution");

  // train
  auto* tr = app.add_subcommand("train", "Train the denoiser on a dataset");
  std::string tr_config, tr_data, tr_out;
  int64_t tr_steps = 5000, tr_ckpt_every = 1000;
  uint64_t tr_seed = 0;
  int tr_batch = 4, tr_threads = 0;
  double tr_lr = 1e-3, tr_drop = 0.1;
  tr->add_option("--config", tr_config, "Model config JSON (defaults when omitted)");
  tr->add_option("--data", tr_data, "Dataset directory (from gen-data)")->required();
  tr->add_option("--steps", tr_steps, "SGD steps");
  tr->add_option("--out", tr_out, "Output directory (default $COHDIFF_OUT_DIR/train)");
  tr->add_option("--seed", tr_seed, "Master seed");
  tr->add_option("--batch", tr_batch, "Batch size")->check(CLI::PositiveNumber);
  tr->add_option("--lr", tr_lr, "SGD step size");
  tr->add_option("--ckpt-every", tr_ckpt_every, "Checkpoint interval in steps");
  tr->add_option("--threads", tr_threads, "Worker threads (0 = hardware)");
  tr->add_option("--uncond-drop", tr_drop, "Caption drop probability");

  // sample
  auto* sm = app.add_subcommand("sample", "Sample images from a checkpoint");
  std::string sm_ckpt, sm_layout, sm_text, sm_caption, sm_out;
  double sm_scale = 2.0;
  uint64_t sm_seed = 0;
  bool sm_det = false;
  int sm_count = 1;
  sm->add_option("--ckpt", sm_ckpt, "Checkpoint file")->required();
  sm->add_option("--layout", sm_layout, "Layout PGM")->required();
  sm->add_option("--text", sm_text, "Grounded text words (comma separated)")->required();
  sm->add_option("--caption", sm_caption, "Caption words (empty = null caption)");
  sm->add_option("--scale", sm_scale, "Classifier-free guidance scale");
  sm->add_option("--seed", sm_seed, "Sampling seed");
  sm->add_option("--out", sm_out, "Output PNG (or directory when --count > 1)");
  sm->add_flag("--deterministic", sm_det, "Noise-free reverse updates");
  sm->add_option("--count", sm_count, "Number of samples")->check(CLI::PositiveNumber);

  // viz-ss
  auto* vz = app.add_subcommand("viz-ss", "Emit self-similarity heat maps");
  std::string vz_ckpt, vz_layout, vz_text, vz_out;
  int vz_step = 100;
  uint64_t vz_seed = 0;
  vz->add_option("--ckpt", vz_ckpt, "Checkpoint file")->required();
  vz->add_option("--layout", vz_layout, "Layout PGM")->required();
  vz->add_option("--text", vz_text, "Grounded text words")->required();
  vz->add_option("--step", vz_step, "Diffusion timestep of the probe forward");
  vz->add_option("--out", vz_out, "Output directory (default $COHDIFF_OUT_DIR/viz)");
  vz->add_option("--seed", vz_seed, "Noise seed for the probe input");

  // verify
  auto* vf = app.add_subcommand("verify", "Run invariant suites");
  std::string vf_suite = "all", vf_report;
  uint64_t vf_seed = 20260811;
  vf->add_option("--suite", vf_suite, "oracles|grads|properties|all");
  vf->add_option("--seed", vf_seed, "Suite seed");
  vf->add_option("--report", vf_report, "Write the JSON report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_seed, gen_n, gen_out, gen_mix, gen_size);
    if (tr->parsed())
      return cmd_train(tr_config, tr_data, tr_steps, tr_out, tr_seed, tr_batch, tr_lr,
                       tr_ckpt_every, tr_threads, tr_drop);
    if (sm->parsed())
      return cmd_sample(sm_ckpt, sm_layout, sm_text, sm_caption, sm_scale, sm_seed, sm_out, sm_det,
                        sm_count);
    if (vz->parsed()) return cmd_viz_ss(vz_ckpt, vz_layout, vz_text, vz_step, vz_out, vz_seed);
    if (vf->parsed()) return cmd_verify(vf_suite, vf_seed, vf_report);
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const VocabularyError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParameterError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitContract;
  }
  return kExitUsage;
}

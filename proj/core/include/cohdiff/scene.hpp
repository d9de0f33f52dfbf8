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

#ifndef COHDIFF_SCENE_HPP_
#define COHDIFF_SCENE_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cohdiff/layout.hpp"
#include "cohdiff/tensor.hpp"
#include "cohdiff/vocab.hpp"

namespace cohdiff {

enum class Adjacency { kTouching, kApart };
enum class Attribute { kBright, kDark };

std::string to_string(Adjacency a);
std::string to_string(Attribute a);
Adjacency adjacency_from_string(const std::string& s);
Attribute attribute_from_string(const std::string& s);

/// Per-class base colors plus the rendering noise level. The minimum
/// pairwise max-channel distance of the base colors is 0.60, which keeps
/// classes separable even under the dark luminance factor (0.60 * 0.4 = 0.24,
/// twelve noise sigmas).
struct Palette {
  std::array<std::array<float, 3>, 4> colors = {{
      {0.15f, 0.25f, 0.55f},  // background
      {0.90f, 0.20f, 0.15f},  // ball
      {0.15f, 0.85f, 0.20f},  // paddle
      {0.85f, 0.80f, 0.15f},  // block
  }};
  float noise_sigma = 0.02f;
  float bright_lum = 1.0f;
  float dark_lum = 0.4f;

  float luminance(Attribute a) const { return a == Attribute::kBright ? bright_lum : dark_lum; }
};

/// What a scene must contain. Unset optional fields are resolved from the
/// scene's own seed, so a spec carrying only the adjacency probe still maps
/// to a fully deterministic scene.
struct SceneSpec {
  std::vector<std::string> shapes = {"background", "ball", "paddle"};
  Adjacency adjacency = Adjacency::kApart;
  std::optional<Attribute> attribute;   // resolved 50/50 when unset
  std::optional<bool> with_block;       // resolved (30% true) when unset; ignored if shapes mention block
};

struct Scene {
  LayoutMap layout;
  std::vector<int> grounded_ids;  // unique class words present, class-id order
  std::vector<int> caption_ids;
  Attribute attribute = Attribute::kBright;
  Adjacency adjacency = Adjacency::kApart;
  Tensor<float> image;  // [3,H,W], palette * luminance + noise, unclamped
  uint64_t seed = 0;
};

/// Deterministic scene construction: layout placement, caption, and the
/// rendered target image are all pure functions of (seed, spec, size).
Scene gen_scene(uint64_t seed, const SceneSpec& spec, int size = 32,
                const Palette& palette = Palette{});

/// Reproducible scene sequence honoring the adjacency mix within +-1 item.
/// Item i is gen_scene(split_seed(seed, i), spec_i).
std::vector<Scene> dataset_stream(uint64_t seed, int n,
                                  const std::vector<std::pair<SceneSpec, double>>& mix,
                                  int size = 32, const Palette& palette = Palette{});

/// One directory per scene: image.png, layout.pgm, tokens.json.
void dump_scene(const std::string& dir, const Scene& scene);
Scene load_scene(const std::string& dir);

// --- measurement helpers used by the CLI score output and acceptance ---

double mean_luminance(const Tensor<float>& image);

/// Fraction of pixels whose nearest attribute-scaled palette color names the
/// layout class.
double palette_class_agreement(const Tensor<float>& image, const LayoutMap& layout,
                               Attribute attribute, const Palette& palette = Palette{});

/// Per-class agreement, indexed by class id (absent classes report -1).
std::vector<double> per_class_agreement(const Tensor<float>& image, const LayoutMap& layout,
                                        Attribute attribute, const Palette& palette = Palette{});

/// Number of 4-adjacent pixel pairs labeled (class_a, class_b).
int count_adjacent_pairs(const LayoutMap& layout, uint8_t class_a, uint8_t class_b);

/// Chebyshev band of the given radius around ball/paddle contact boundaries.
std::vector<uint8_t> touching_boundary_band(const LayoutMap& layout, int radius = 2);

}  // namespace cohdiff

#endif  // COHDIFF_SCENE_HPP_

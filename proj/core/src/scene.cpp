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

#include "cohdiff/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "cohdiff/image_io.hpp"
#include "cohdiff/rng.hpp"

namespace cohdiff {

namespace {

constexpr uint8_t kBackground = 0;
constexpr uint8_t kBall = 1;
constexpr uint8_t kPaddle = 2;
constexpr uint8_t kBlock = 3;

bool region_free(const LayoutMap& m, int y0, int x0, int y1, int x1) {
  if (y0 < 0 || x0 < 0 || y1 > m.h || x1 > m.w) return false;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      if (m.at(y, x) != kBackground) return false;
  return true;
}

void paint_disc(LayoutMap& m, int cy, int cx, int r, uint8_t cls) {
  for (int y = cy - r; y <= cy + r; ++y)
    for (int x = cx - r; x <= cx + r; ++x)
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) m.at(y, x) = cls;
}

void paint_rect(LayoutMap& m, int y0, int x0, int h, int w, uint8_t cls) {
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) m.at(y, x) = cls;
}

}  // namespace

std::string to_string(Adjacency a) { return a == Adjacency::kTouching ? "touching" : "apart"; }
std::string to_string(Attribute a) { return a == Attribute::kBright ? "bright" : "dark"; }

Adjacency adjacency_from_string(const std::string& s) {
  if (s == "touching") return Adjacency::kTouching;
  if (s == "apart") return Adjacency::kApart;
  throw ParameterError("unknown adjacency: '" + s + "'");
}

Attribute attribute_from_string(const std::string& s) {
  if (s == "bright") return Attribute::kBright;
  if (s == "dark") return Attribute::kDark;
  throw ParameterError("unknown attribute: '" + s + "'");
}

Scene gen_scene(uint64_t seed, const SceneSpec& spec, int size, const Palette& palette) {
  if (size < 16) throw GenerationError("gen_scene: grid must be at least 16x16");
  const Vocab& vocab = Vocab::builtin();

  bool want_ball = false, want_paddle = false, want_block = false;
  for (const auto& s : spec.shapes) {
    if (s == "ball") want_ball = true;
    else if (s == "paddle") want_paddle = true;
    else if (s == "block") want_block = true;
    else if (s != "background") throw GenerationError("gen_scene: unknown shape '" + s + "'");
  }
  if (!want_ball || !want_paddle)
    throw GenerationError("gen_scene: the adjacency probe requires ball and paddle");

  Rng rng(seed);
  const Attribute attr = spec.attribute ? *spec.attribute
                                        : (rng.uniform() < 0.5 ? Attribute::kBright : Attribute::kDark);
  if (!want_block) {
    const bool extra = spec.with_block ? *spec.with_block : rng.uniform() < 0.3;
    want_block = extra;
  }

  Scene scene;
  scene.seed = seed;
  scene.attribute = attr;
  scene.adjacency = spec.adjacency;
  scene.layout = LayoutMap(size, size, kBackground);
  LayoutMap& m = scene.layout;

  // Paddle: a horizontal bar in the lower half.
  const int pw = static_cast<int>(rng.uniform_int(size / 4, size / 3 + 2));
  const int ph = static_cast<int>(rng.uniform_int(2, 3));
  const int px = static_cast<int>(rng.uniform_int(2, size - 2 - pw));
  const int py = static_cast<int>(rng.uniform_int(size * 5 / 8, size - 3 - ph));
  paint_rect(m, py, px, ph, pw, kPaddle);

  // Ball: tangent above the paddle when touching, separated by >= 2 empty
  // rows when apart. The center column stays over the paddle to make the
  // touching boundary well-defined.
  const int r = static_cast<int>(rng.uniform_int(2, std::max(2, size / 10)));
  const int cx = static_cast<int>(rng.uniform_int(std::max(r + 1, px + 1),
                                                  std::min(size - r - 2, px + pw - 2)));
  int cy;
  if (spec.adjacency == Adjacency::kTouching) {
    cy = py - 1 - r;  // bottom pixel of the disc sits directly on the paddle top row
  } else {
    const int max_cy = py - r - 3;  // >= 2 empty rows below the disc
    const int min_cy = r + 1;
    if (max_cy < min_cy) throw GenerationError("gen_scene: no room for a separated ball");
    cy = static_cast<int>(rng.uniform_int(min_cy, max_cy));
  }
  if (cy - r < 0) throw GenerationError("gen_scene: ball does not fit above the paddle");
  paint_disc(m, cy, cx, r, kBall);

  if (want_block) {
    const int side = static_cast<int>(rng.uniform_int(3, 5));
    bool placed = false;
    for (int attempt = 0; attempt < 32 && !placed; ++attempt) {
      const int by = static_cast<int>(rng.uniform_int(1, size / 4));
      const int bx = static_cast<int>(rng.uniform_int(1, size - 1 - side));
      if (region_free(m, by - 1, bx - 1, by + side + 1, bx + side + 1)) {
        paint_rect(m, by, bx, side, side, kBlock);
        placed = true;
      }
    }
    if (!placed) throw GenerationError("gen_scene: could not place the block");
  }

  // Grounded text: one word per class present, in class-id order.
  std::set<uint8_t> present(m.ids.begin(), m.ids.end());
  for (uint8_t cls : present) scene.grounded_ids.push_back(vocab.class_words()[cls]);

  scene.caption_ids = vocab.tokenize({"a", to_string(attr), "scene"});

  // Render: per-class palette color scaled by the attribute luminance plus
  // seeded Gaussian pixel noise.
  const float lum = palette.luminance(attr);
  scene.image = Tensor<float>({3, size, size});
  float* img = scene.image.mutable_data();
  const int64_t plane = static_cast<int64_t>(size) * size;
  for (int64_t p = 0; p < plane; ++p) {
    const auto& base = palette.colors[m.ids[static_cast<size_t>(p)]];
    for (int c = 0; c < 3; ++c)
      img[c * plane + p] =
          base[static_cast<size_t>(c)] * lum + static_cast<float>(rng.normal()) * palette.noise_sigma;
  }
  return scene;
}

std::vector<Scene> dataset_stream(uint64_t seed, int n,
                                  const std::vector<std::pair<SceneSpec, double>>& mix, int size,
                                  const Palette& palette) {
  if (n < 1) throw ParameterError("dataset_stream: n must be >= 1");
  if (mix.empty()) throw ParameterError("dataset_stream: empty mix");

  // Largest-remainder apportionment of n over the mix entries.
  double total = 0;
  for (const auto& [spec, p] : mix) total += p;
  if (total <= 0) throw ParameterError("dataset_stream: mix proportions must sum > 0");
  std::vector<int> counts(mix.size(), 0);
  std::vector<std::pair<double, size_t>> remainders;
  int assigned = 0;
  for (size_t i = 0; i < mix.size(); ++i) {
    const double exact = mix[i].second / total * n;
    counts[i] = static_cast<int>(exact);
    assigned += counts[i];
    remainders.emplace_back(exact - counts[i], i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; assigned < n; ++i, ++assigned) counts[remainders[static_cast<size_t>(i) % remainders.size()].second]++;

  std::vector<size_t> order;
  for (size_t i = 0; i < mix.size(); ++i)
    for (int c = 0; c < counts[i]; ++c) order.push_back(i);
  Rng shuffle_rng(split_seed(seed, 0xD5));
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);

  std::vector<Scene> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    out.push_back(gen_scene(split_seed(seed, static_cast<uint64_t>(i)), mix[order[static_cast<size_t>(i)]].first,
                            size, palette));
  return out;
}

void dump_scene(const std::string& dir, const Scene& scene) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("dump_scene: cannot create " + dir);

  write_png(dir + "/image.png", tensor_to_rgb8(scene.image));
  write_pgm(dir + "/layout.pgm", scene.layout);

  const Vocab& vocab = Vocab::builtin();
  nlohmann::json j;
  j["grounded"] = vocab.words_of(scene.grounded_ids);
  j["caption"] = vocab.words_of(scene.caption_ids);
  j["attribute"] = to_string(scene.attribute);
  j["adjacency"] = to_string(scene.adjacency);
  j["seed"] = scene.seed;
  std::ofstream f(dir + "/tokens.json", std::ios::trunc);
  if (!f) throw IoError("dump_scene: cannot write tokens.json in " + dir);
  f << j.dump(2) << "\n";
}

Scene load_scene(const std::string& dir) {
  Scene scene;
  scene.image = rgb8_to_tensor<float>(read_png(dir + "/image.png"));
  scene.layout = read_pgm(dir + "/layout.pgm");

  std::ifstream f(dir + "/tokens.json");
  if (!f) throw IoError("load_scene: missing tokens.json in " + dir);
  nlohmann::json j;
  f >> j;
  const Vocab& vocab = Vocab::builtin();
  scene.grounded_ids = vocab.tokenize(j.at("grounded").get<std::vector<std::string>>());
  scene.caption_ids = vocab.tokenize(j.at("caption").get<std::vector<std::string>>());
  scene.attribute = attribute_from_string(j.at("attribute").get<std::string>());
  scene.adjacency = adjacency_from_string(j.at("adjacency").get<std::string>());
  scene.seed = j.value("seed", 0ULL);
  return scene;
}

double mean_luminance(const Tensor<float>& image) {
  double acc = 0;
  for (int64_t i = 0; i < image.numel(); ++i) acc += image.data()[i];
  return acc / static_cast<double>(image.numel());
}

std::vector<double> per_class_agreement(const Tensor<float>& image, const LayoutMap& layout,
                                        Attribute attribute, const Palette& palette) {
  if (image.dim(1) != layout.h || image.dim(2) != layout.w)
    throw DimensionError("per_class_agreement: image/layout size mismatch");
  const float lum = palette.luminance(attribute);
  const int64_t plane = static_cast<int64_t>(layout.h) * layout.w;
  std::vector<int64_t> hits(palette.colors.size(), 0), totals(palette.colors.size(), 0);
  for (int64_t p = 0; p < plane; ++p) {
    int best = 0;
    double best_d = 1e30;
    for (size_t c = 0; c < palette.colors.size(); ++c) {
      double d = 0;
      for (int ch = 0; ch < 3; ++ch) {
        const double diff = static_cast<double>(image.data()[ch * plane + p]) -
                            static_cast<double>(palette.colors[c][static_cast<size_t>(ch)]) * lum;
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    const uint8_t truth = layout.ids[static_cast<size_t>(p)];
    totals[truth]++;
    if (best == truth) hits[truth]++;
  }
  std::vector<double> out(palette.colors.size(), -1.0);
  for (size_t c = 0; c < out.size(); ++c)
    if (totals[c] > 0) out[c] = static_cast<double>(hits[c]) / static_cast<double>(totals[c]);
  return out;
}

double palette_class_agreement(const Tensor<float>& image, const LayoutMap& layout,
                               Attribute attribute, const Palette& palette) {
  const float lum = palette.luminance(attribute);
  const int64_t plane = static_cast<int64_t>(layout.h) * layout.w;
  int64_t hits = 0;
  for (int64_t p = 0; p < plane; ++p) {
    int best = 0;
    double best_d = 1e30;
    for (size_t c = 0; c < palette.colors.size(); ++c) {
      double d = 0;
      for (int ch = 0; ch < 3; ++ch) {
        const double diff = static_cast<double>(image.data()[ch * plane + p]) -
                            static_cast<double>(palette.colors[c][static_cast<size_t>(ch)]) * lum;
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    if (best == layout.ids[static_cast<size_t>(p)]) hits++;
  }
  return static_cast<double>(hits) / static_cast<double>(plane);
}

int count_adjacent_pairs(const LayoutMap& layout, uint8_t class_a, uint8_t class_b) {
  int count = 0;
  for (int y = 0; y < layout.h; ++y)
    for (int x = 0; x < layout.w; ++x) {
      const uint8_t c = layout.at(y, x);
      if (x + 1 < layout.w) {
        const uint8_t r = layout.at(y, x + 1);
        if ((c == class_a && r == class_b) || (c == class_b && r == class_a)) count++;
      }
      if (y + 1 < layout.h) {
        const uint8_t d = layout.at(y + 1, x);
        if ((c == class_a && d == class_b) || (c == class_b && d == class_a)) count++;
      }
    }
  return count;
}

std::vector<uint8_t> touching_boundary_band(const LayoutMap& layout, int radius) {
  std::vector<uint8_t> band(static_cast<size_t>(layout.h) * layout.w, 0);
  for (int y = 0; y < layout.h; ++y)
    for (int x = 0; x < layout.w; ++x) {
      bool boundary = false;
      const uint8_t c = layout.at(y, x);
      const auto probe = [&](int yy, int xx) {
        if (yy < 0 || yy >= layout.h || xx < 0 || xx >= layout.w) return;
        const uint8_t o = layout.at(yy, xx);
        if ((c == kBall && o == kPaddle) || (c == kPaddle && o == kBall)) boundary = true;
      };
      probe(y - 1, x);
      probe(y + 1, x);
      probe(y, x - 1);
      probe(y, x + 1);
      if (!boundary) continue;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < layout.h && xx >= 0 && xx < layout.w)
            band[static_cast<size_t>(yy) * layout.w + xx] = 1;
        }
    }
  return band;
}

}  // namespace cohdiff

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

#ifndef COHDIFF_IMAGE_IO_HPP_
#define COHDIFF_IMAGE_IO_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cohdiff/layout.hpp"
#include "cohdiff/tensor.hpp"

namespace cohdiff {

struct ImageU8 {
  int w = 0;
  int h = 0;
  int channels = 0;  // 1 or 3
  std::vector<uint8_t> pixels;  // row-major, interleaved
};

/// Minimal deterministic PNG writer: 8-bit gray or RGB, filter 0, one
/// zlib-compressed IDAT. Identical input always gives identical bytes.
void write_png(const std::string& path, const ImageU8& img);

/// Reads 8-bit gray/RGB PNGs (all five scanline filters supported).
ImageU8 read_png(const std::string& path);

/// Binary PGM (P5, maxval 255); layout class ids map to raw bytes.
void write_pgm(const std::string& path, const LayoutMap& m);
LayoutMap read_pgm(const std::string& path);

/// [3,H,W] float tensor in [0,1] -> interleaved RGB bytes (clamped, rounded).
template <class S>
ImageU8 tensor_to_rgb8(const Tensor<S>& t) {
  if (t.ndim() != 3 || t.dim(0) != 3) throw DimensionError("tensor_to_rgb8: expects [3,H,W]");
  ImageU8 img;
  img.h = t.dim(1);
  img.w = t.dim(2);
  img.channels = 3;
  img.pixels.resize(static_cast<size_t>(img.h) * img.w * 3);
  const int64_t plane = static_cast<int64_t>(img.h) * img.w;
  for (int64_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) {
      double v = static_cast<double>(t.data()[c * plane + p]);
      v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      img.pixels[static_cast<size_t>(p) * 3 + c] = static_cast<uint8_t>(v * 255.0 + 0.5);
    }
  return img;
}

template <class S>
Tensor<S> rgb8_to_tensor(const ImageU8& img) {
  if (img.channels != 3) throw DimensionError("rgb8_to_tensor: expects RGB");
  Tensor<S> t({3, img.h, img.w});
  const int64_t plane = static_cast<int64_t>(img.h) * img.w;
  S* pt = t.mutable_data();
  for (int64_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c)
      pt[c * plane + p] = static_cast<S>(img.pixels[static_cast<size_t>(p) * 3 + c]) / S(255);
  return t;
}

/// [0,1] doubles -> grayscale bytes with min/max already applied by caller.
ImageU8 gray_to_image(const std::vector<double>& values, int h, int w);

}  // namespace cohdiff

#endif  // COHDIFF_IMAGE_IO_HPP_

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

#ifndef COHDIFF_LAYOUT_HPP_
#define COHDIFF_LAYOUT_HPP_

#include <cstdint>
#include <vector>

#include "cohdiff/errors.hpp"

namespace cohdiff {

/// Integer class-id grid. Ids are categorical; they are never interpolated.
struct LayoutMap {
  int h = 0;
  int w = 0;
  std::vector<uint8_t> ids;  // row-major, h*w entries

  LayoutMap() = default;
  LayoutMap(int height, int width, uint8_t fill = 0)
      : h(height), w(width), ids(static_cast<size_t>(height) * width, fill) {
    if (height < 1 || width < 1) throw ParameterError("LayoutMap: extents must be >= 1");
  }

  uint8_t at(int y, int x) const { return ids[static_cast<size_t>(y) * w + x]; }
  uint8_t& at(int y, int x) { return ids[static_cast<size_t>(y) * w + x]; }

  bool operator==(const LayoutMap& o) const { return h == o.h && w == o.w && ids == o.ids; }
};

/// Nearest-neighbor resize by integer floor scaling: output pixel (Y,X) reads
/// input pixel (Y*h/H, X*w/W). Class ids pass through untouched, so the
/// output label set is a subset of the input's, and matching sizes give an
/// identical map.
inline LayoutMap resize_nearest(const LayoutMap& m, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw ParameterError("resize_nearest: target extents must be >= 1");
  LayoutMap out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const int sy = static_cast<int>(static_cast<int64_t>(y) * m.h / out_h);
    for (int x = 0; x < out_w; ++x) {
      const int sx = static_cast<int>(static_cast<int64_t>(x) * m.w / out_w);
      out.at(y, x) = m.at(sy, sx);
    }
  }
  return out;
}

}  // namespace cohdiff

#endif  // COHDIFF_LAYOUT_HPP_

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

#include "cohdiff/image_io.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "cohdiff/errors.hpp"

namespace cohdiff {

namespace {

void put_be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_be32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& payload) {
  put_be32(out, static_cast<uint32_t>(payload.size()));
  const size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
  put_be32(out, crc);
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open file: " + path);
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)),
                              std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const void* data, size_t size) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open file for writing: " + path);
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!f) throw IoError("write failed: " + path);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

const uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace

void write_png(const std::string& path, const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ParameterError("write_png: only gray or RGB supported");
  if (img.pixels.size() != static_cast<size_t>(img.w) * img.h * img.channels)
    throw DimensionError("write_png: pixel buffer size mismatch");

  const size_t stride = static_cast<size_t>(img.w) * img.channels;
  std::vector<uint8_t> raw((stride + 1) * static_cast<size_t>(img.h));
  for (int y = 0; y < img.h; ++y) {
    raw[y * (stride + 1)] = 0;  // filter type 0
    std::memcpy(raw.data() + y * (stride + 1) + 1, img.pixels.data() + y * stride, stride);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("write_png: deflate failed");
  compressed.resize(bound);

  std::vector<uint8_t> ihdr;
  put_be32(ihdr, static_cast<uint32_t>(img.w));
  put_be32(ihdr, static_cast<uint32_t>(img.h));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(img.channels == 3 ? 2 : 0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);

  std::vector<uint8_t> out(kPngSig, kPngSig + 8);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", compressed);
  append_chunk(out, "IEND", {});
  write_file(path, out.data(), out.size());
}

ImageU8 read_png(const std::string& path) {
  const std::vector<uint8_t> buf = read_file(path);
  if (buf.size() < 8 || std::memcmp(buf.data(), kPngSig, 8) != 0)
    throw IoError("read_png: not a PNG file: " + path);

  ImageU8 img;
  std::vector<uint8_t> idat;
  int bit_depth = 0, color_type = -1;
  size_t pos = 8;
  while (pos + 8 <= buf.size()) {
    const uint32_t len = get_be32(buf.data() + pos);
    if (pos + 12 + len > buf.size()) throw IoError("read_png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(buf.data() + pos + 4);
    const uint8_t* payload = buf.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      img.w = static_cast<int>(get_be32(payload));
      img.h = static_cast<int>(get_be32(payload + 4));
      bit_depth = payload[8];
      color_type = payload[9];
      if (payload[12] != 0) throw IoError("read_png: interlaced PNGs unsupported");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (bit_depth != 8 || (color_type != 0 && color_type != 2))
    throw IoError("read_png: only 8-bit gray/RGB supported");
  img.channels = color_type == 2 ? 3 : 1;

  const size_t stride = static_cast<size_t>(img.w) * img.channels;
  std::vector<uint8_t> raw((stride + 1) * static_cast<size_t>(img.h));
  uLongf raw_size = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_size != raw.size())
    throw IoError("read_png: inflate failed");

  img.pixels.resize(stride * static_cast<size_t>(img.h));
  const int bpp = img.channels;
  for (int y = 0; y < img.h; ++y) {
    const uint8_t filter = raw[y * (stride + 1)];
    const uint8_t* src = raw.data() + y * (stride + 1) + 1;
    uint8_t* dst = img.pixels.data() + y * stride;
    const uint8_t* up = y > 0 ? img.pixels.data() + (y - 1) * stride : nullptr;
    for (size_t x = 0; x < stride; ++x) {
      const int left = x >= static_cast<size_t>(bpp) ? dst[x - bpp] : 0;
      const int above = up ? up[x] : 0;
      const int corner = (up && x >= static_cast<size_t>(bpp)) ? up[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += above; break;
        case 3: v += (left + above) / 2; break;
        case 4: v += paeth(left, above, corner); break;
        default: throw IoError("read_png: unknown filter type");
      }
      dst[x] = static_cast<uint8_t>(v);
    }
  }
  return img;
}

void write_pgm(const std::string& path, const LayoutMap& m) {
  std::string header = "P5\n" + std::to_string(m.w) + " " + std::to_string(m.h) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), m.ids.begin(), m.ids.end());
  write_file(path, out.data(), out.size());
}

LayoutMap read_pgm(const std::string& path) {
  const std::vector<uint8_t> buf = read_file(path);
  int w = 0, h = 0, maxval = 0, consumed = 0;
  if (std::sscanf(reinterpret_cast<const char*>(buf.data()), "P5 %d %d %d%n", &w, &h, &maxval,
                  &consumed) != 3 ||
      maxval != 255)
    throw IoError("read_pgm: not a binary 8-bit PGM: " + path);
  const size_t data_start = static_cast<size_t>(consumed) + 1;  // single whitespace after maxval
  if (buf.size() < data_start + static_cast<size_t>(w) * h)
    throw IoError("read_pgm: truncated: " + path);
  LayoutMap m(h, w);
  std::memcpy(m.ids.data(), buf.data() + data_start, static_cast<size_t>(w) * h);
  return m;
}

ImageU8 gray_to_image(const std::vector<double>& values, int h, int w) {
  if (values.size() != static_cast<size_t>(h) * w)
    throw DimensionError("gray_to_image: size mismatch");
  ImageU8 img;
  img.h = h;
  img.w = w;
  img.channels = 1;
  img.pixels.resize(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    double v = values[i];
    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    img.pixels[i] = static_cast<uint8_t>(v * 255.0 + 0.5);
  }
  return img;
}

}  // namespace cohdiff

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
//
// Named-tensor checkpoint container. File layout (documented in README):
//   bytes 0..7   magic "COHDIFF1"
//   bytes 8..15  little-endian u64 header length
//   header       UTF-8 JSON: {"version":1,
//                             "tensors": {name -> {dtype, shape, byte_offset}},
//                             "config": {...}, "step": N}
//   payload      raw little-endian scalars, tensors at their byte_offset
// Offsets are relative to the payload start. dtype is "f32" or "f64".

#ifndef COHDIFF_CHECKPOINT_HPP_
#define COHDIFF_CHECKPOINT_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cohdiff/errors.hpp"
#include "cohdiff/tape.hpp"
#include "cohdiff/tensor.hpp"

namespace cohdiff {

inline constexpr char kCheckpointMagic[8] = {'C', 'O', 'H', 'D', 'I', 'F', 'F', '1'};

template <class S>
const char* dtype_name() {
  return sizeof(S) == 4 ? "f32" : "f64";
}

template <class S>
void save_checkpoint(const std::string& path, const ParamStore<S>& params,
                     const nlohmann::json& config, int64_t step) {
  nlohmann::json tensors = nlohmann::json::object();
  uint64_t offset = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    const Parameter<S>& p = params[i];
    tensors[p.name] = {{"dtype", dtype_name<S>()},
                       {"shape", p.value.shape()},
                       {"byte_offset", offset}};
    offset += static_cast<uint64_t>(p.value.numel()) * sizeof(S);
  }
  nlohmann::json header = {
      {"version", 1}, {"tensors", tensors}, {"config", config}, {"step", step}};
  const std::string header_str = header.dump();

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("save_checkpoint: cannot open " + path);
  f.write(kCheckpointMagic, 8);
  const uint64_t hlen = header_str.size();
  f.write(reinterpret_cast<const char*>(&hlen), 8);
  f.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const Parameter<S>& p = params[i];
    f.write(reinterpret_cast<const char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.numel() * static_cast<int64_t>(sizeof(S))));
  }
  if (!f) throw IoError("save_checkpoint: write failed for " + path);
}

struct CheckpointHeader {
  nlohmann::json header;
  nlohmann::json config;
  int64_t step = 0;
  size_t payload_offset = 0;
};

inline CheckpointHeader read_checkpoint_header(const std::vector<char>& buf,
                                               const std::string& path) {
  if (buf.size() < 16 || std::memcmp(buf.data(), kCheckpointMagic, 8) != 0)
    throw CheckpointError("not a checkpoint file: " + path);
  uint64_t hlen = 0;
  std::memcpy(&hlen, buf.data() + 8, 8);
  if (buf.size() < 16 + hlen) throw CheckpointError("truncated checkpoint header: " + path);
  CheckpointHeader out;
  try {
    out.header = nlohmann::json::parse(buf.begin() + 16, buf.begin() + 16 + static_cast<long>(hlen));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt checkpoint header: " + std::string(e.what()));
  }
  out.config = out.header.value("config", nlohmann::json::object());
  out.step = out.header.value("step", int64_t{0});
  out.payload_offset = 16 + hlen;
  return out;
}

inline std::vector<char> read_checkpoint_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  return std::vector<char>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

/// Reads config echo and step counter without touching tensor data.
inline CheckpointHeader load_checkpoint_meta(const std::string& path) {
  const auto buf = read_checkpoint_file(path);
  return read_checkpoint_header(buf, path);
}

/// Loads every parameter in `params` from the file. Names, shapes, and dtype
/// must all match; any mismatch or truncation aborts before a single value
/// is written, so the store is never left half-loaded.
template <class S>
CheckpointHeader load_checkpoint(const std::string& path, ParamStore<S>& params) {
  const auto buf = read_checkpoint_file(path);
  CheckpointHeader meta = read_checkpoint_header(buf, path);
  const auto& tensors = meta.header.at("tensors");

  std::vector<std::vector<S>> staged(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter<S>& p = params[i];
    if (!tensors.contains(p.name))
      throw CheckpointError("checkpoint is missing tensor '" + p.name + "'");
    const auto& entry = tensors.at(p.name);
    if (entry.at("dtype").template get<std::string>() != dtype_name<S>())
      throw CheckpointError("dtype mismatch for '" + p.name + "'");
    const Shape shape = entry.at("shape").template get<Shape>();
    if (shape != p.value.shape())
      throw CheckpointError("shape mismatch for '" + p.name + "': file has " + shape_str(shape) +
                            ", model expects " + shape_str(p.value.shape()));
    const uint64_t off = entry.at("byte_offset").template get<uint64_t>();
    const uint64_t bytes = static_cast<uint64_t>(p.value.numel()) * sizeof(S);
    if (meta.payload_offset + off + bytes > buf.size())
      throw CheckpointError("truncated checkpoint payload for '" + p.name + "'");
    staged[i].resize(static_cast<size_t>(p.value.numel()));
    std::memcpy(staged[i].data(), buf.data() + meta.payload_offset + off, bytes);
  }
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter<S>& p = params[i];
    std::memcpy(p.value.mutable_data(), staged[i].data(),
                staged[i].size() * sizeof(S));
  }
  return meta;
}

}  // namespace cohdiff

#endif  // COHDIFF_CHECKPOINT_HPP_

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

#include "cohdiff/vocab.hpp"

namespace cohdiff {

Vocab::Vocab() {
  words_ = {
      "<pad>",  "<null>",                                   // reserved
      "background", "ball", "paddle", "block",              // layout classes
      "bright", "dark",                                     // caption attributes
      "touching", "apart", "near", "above", "below", "beside",
      "a", "the", "scene", "with", "and", "image",
      "small", "large", "left", "right", "top", "bottom",
      "red", "green", "blue", "yellow", "wall", "floor",
  };
  for (size_t i = 0; i < words_.size(); ++i) index_[words_[i]] = static_cast<int>(i);
  class_words_ = {id("background"), id("ball"), id("paddle"), id("block")};
}

const Vocab& Vocab::builtin() {
  static const Vocab v;
  return v;
}

int Vocab::id(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) throw VocabularyError("unknown word: '" + word + "'");
  return it->second;
}

const std::string& Vocab::word(int id) const {
  if (id < 0 || id >= size()) throw VocabularyError("id out of range: " + std::to_string(id));
  return words_[static_cast<size_t>(id)];
}

std::vector<int> Vocab::tokenize(const std::vector<std::string>& words) const {
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id(w));
  return ids;
}

std::vector<std::string> Vocab::words_of(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(word(i));
  return out;
}

}  // namespace cohdiff

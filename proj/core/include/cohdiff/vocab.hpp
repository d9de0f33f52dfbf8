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

#ifndef COHDIFF_VOCAB_HPP_
#define COHDIFF_VOCAB_HPP_

#include <string>
#include <unordered_map>
#include <vector>

#include "cohdiff/errors.hpp"

namespace cohdiff {

/// Closed 32-word vocabulary with stable ids. Slot 0 is the padding token
/// and slot 1 the learned null caption; both are reserved words that never
/// appear in scene text.
class Vocab {
 public:
  static const Vocab& builtin();

  int id(const std::string& word) const;
  const std::string& word(int id) const;
  std::vector<int> tokenize(const std::vector<std::string>& words) const;
  std::vector<std::string> words_of(const std::vector<int>& ids) const;

  int size() const { return static_cast<int>(words_.size()); }
  int pad_id() const { return 0; }
  int null_id() const { return 1; }

  /// Vocabulary id of each layout class, indexed by class id.
  const std::vector<int>& class_words() const { return class_words_; }
  int num_classes() const { return static_cast<int>(class_words_.size()); }

 private:
  Vocab();
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
  std::vector<int> class_words_;
};

}  // namespace cohdiff

#endif  // COHDIFF_VOCAB_HPP_

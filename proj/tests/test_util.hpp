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

#ifndef COHDIFF_TESTS_TEST_UTIL_HPP_
#define COHDIFF_TESTS_TEST_UTIL_HPP_

#include <filesystem>
#include <string>

#include "cohdiff/rng.hpp"
#include "cohdiff/tensor.hpp"

namespace cohdiff::test {

template <class S>
Tensor<S> randn(Rng& rng, Shape shape, double sigma = 1.0) {
  Tensor<S> t(std::move(shape));
  rng.fill_normal(t.mutable_data(), t.numel(), sigma);
  return t;
}

inline std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cohdiff_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace cohdiff::test

#endif  // COHDIFF_TESTS_TEST_UTIL_HPP_

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

#ifndef COHDIFF_ERRORS_HPP_
#define COHDIFF_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace cohdiff {

/// Base class for all contract violations raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape or extent mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Softmax slice with every logit masked out.
class MaskingError : public Error {
 public:
  using Error::Error;
};

/// Region mask row with no allowed token.
class RectificationError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range or otherwise invalid argument value.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Token or word outside the closed vocabulary.
class VocabularyError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated, or incompatible checkpoint file.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Scene construction that cannot satisfy its spec.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or otherwise diverged training step.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Non-finite sampler state; message carries the step index.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// Non-finite objective during numeric gradient evaluation.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Filesystem-level failure (open, read, write).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cohdiff

#endif  // COHDIFF_ERRORS_HPP_

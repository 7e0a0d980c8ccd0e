// Copyright (c) the pivotc authors.
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

#ifndef PIVOTC_ERRORS_HPP_
#define PIVOTC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace pivotc {

// Base class for all pivotc failures. Subclasses map onto CLI exit codes:
// IoError -> 3, ModelError -> 5, everything else -> 4.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem-level failures (missing file, unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed textual input (PLY headers, config files, CSV).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structural failures of binary formats (container, checkpoint).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Corrupted or truncated coded payloads.
class CodecError : public Error {
 public:
  using Error::Error;
};

// Tensor/feature dimension mismatches. Messages carry both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Out-of-range coordinates or invalid quantization steps.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Checkpoint/model mismatches and invalid learned densities.
class ModelError : public Error {
 public:
  using Error::Error;
};

// Degenerate metric inputs (empty sets, disjoint RD ranges).
class MetricError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or gradient.
class DivergedError : public Error {
 public:
  using Error::Error;
};

}  // namespace pivotc

#endif  // PIVOTC_ERRORS_HPP_

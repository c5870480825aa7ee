// Copyright 2026 The semisup Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace semisup {

// Process exit codes: 0 ok, 2 config error, 3 data error, 4 numeric error.
enum class ErrorKind : int {
  config = 2,
  data = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

// Bad configuration: unknown keys, out-of-range settings, missing inputs
// detected before any compute.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(ErrorKind::config, msg) {}
};

// Bad data: labels out of range, empty datasets, degenerate batches.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(ErrorKind::data, msg) {}
};

// Malformed file on disk; message carries the byte offset where parsing failed.
class FormatError : public DataError {
 public:
  explicit FormatError(const std::string& msg) : DataError(msg) {}
};

// Corrupt file: content hash or length check failed after a well-formed header.
class CorruptionError : public DataError {
 public:
  explicit CorruptionError(const std::string& msg) : DataError(msg) {}
};

// Batch too small for an operation that needs at least two rows.
class DegenerateBatchError : public DataError {
 public:
  explicit DegenerateBatchError(const std::string& msg) : DataError(msg) {}
};

// Numeric/contract failures inside the engine.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

// Tensor shape/rank mismatch; message names the offending shapes.
class ShapeError : public NumericError {
 public:
  explicit ShapeError(const std::string& msg) : NumericError(msg) {}
};

// Math domain violation (e.g. log of a non-positive value).
class DomainError : public NumericError {
 public:
  explicit DomainError(const std::string& msg) : NumericError(msg) {}
};

// A documented precondition was violated by the caller (e.g. rows not
// unit-norm where the contract requires it).
class ContractError : public NumericError {
 public:
  explicit ContractError(const std::string& msg) : NumericError(msg) {}
};

// backward() called twice on the same recorded graph.
class GraphReuseError : public NumericError {
 public:
  explicit GraphReuseError(const std::string& msg) : NumericError(msg) {}
};

// Two networks whose parameter topologies were expected to match do not.
class StructureError : public NumericError {
 public:
  explicit StructureError(const std::string& msg) : NumericError(msg) {}
};

// A training-protocol rule was broken (e.g. label access during pretraining).
class ProtocolError : public NumericError {
 public:
  explicit ProtocolError(const std::string& msg) : NumericError(msg) {}
};

}  // namespace semisup

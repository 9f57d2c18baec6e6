// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace vace {

/// Shape or extent mismatch. The message names the operation and the shapes.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument value (non-positive size, out-of-range index, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Value-domain violation, e.g. a mask entry that is neither 0 nor 1.
class ValueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a function contract (e.g. grad_check on a non-scalar function).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed container or checkpoint. Carries the byte offset of the failure.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        message_(what),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }
  /// The message without the offset suffix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string message_;
  std::size_t offset_;
};

/// Filesystem failure (missing file, unwritable directory).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IncompatibleVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vace

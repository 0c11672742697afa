// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mirrorloop {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented contract was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration; never retried.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Observations arrived out of iteration order.
class SequencingError : public Error {
 public:
  using Error::Error;
};

// Malformed persisted data. line() is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mirrorloop

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lens {

/// Base class of every error thrown by the toolkit. `kind()` is a short
/// stable token used by the CLI for machine-readable error lines.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class EmptySequenceError : public Error {
 public:
  explicit EmptySequenceError(const std::string& what) : Error("empty_sequence", what) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& what) : Error("state", what) {}
};

/// A NaN or Inf appeared where only finite values are allowed.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

enum class ParseErrorKind {
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kInconsistentDim,
  kFormat,
  kUnknownId,
};

const char* to_string(ParseErrorKind kind) noexcept;

/// Parse failure with file and record context. `record` is a record index for
/// binary formats and a 1-based line number for text formats.
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, std::string file, std::int64_t record, const std::string& detail);

  ParseErrorKind parse_kind() const noexcept { return parse_kind_; }
  const std::string& file() const noexcept { return file_; }
  std::int64_t record() const noexcept { return record_; }

 private:
  ParseErrorKind parse_kind_;
  std::string file_;
  std::int64_t record_;
};

/// Training diverged (NaN loss or gradient).
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error("divergence", what) {}
};

}  // namespace lens

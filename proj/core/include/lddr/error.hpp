#pragma once

#include <stdexcept>
#include <string>

namespace lddr {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent configuration: channel mismatch, bad stage index, k <= 0, ...
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A layer window does not fit its (padded) input.
class GeometryError : public Error {
 public:
  GeometryError(std::string layer, const std::string& what)
      : Error(what), layer_(std::move(layer)) {}
  explicit GeometryError(const std::string& what) : Error(what) {}

  const std::string& layer() const noexcept { return layer_; }

 private:
  std::string layer_;
};

/// Invalid caller-supplied data (empty lists, mixed landmark counts, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  malformed_header,
  truncated,
  shape_mismatch,
  unsupported_version,
  trailing_data,
  count_mismatch,
  bad_token,
  unsupported_format,
};

const char* to_string(ParseErrorKind kind) noexcept;

/// Malformed file contents. `line()` is 0 for binary formats.
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what, int line = 0);

  ParseErrorKind kind() const noexcept { return kind_; }
  int line() const noexcept { return line_; }
  /// The message without the kind prefix and line suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ParseErrorKind kind_;
  int line_;
  std::string detail_;
};

/// Filesystem failures (missing files, unwritable directories).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Singular or otherwise unsolvable linear systems.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Metric undefined for one image (zero normaliser).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace lddr

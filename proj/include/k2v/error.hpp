#pragma once

#include <stdexcept>
#include <string>

namespace k2v {

/// Base of every error raised by the toolkit. `code()` is a stable,
/// machine-readable identifier that the CLI forwards in its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error("dimension", msg) {}
};

class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& msg) : Error("non_finite", msg) {}
};

class DegenerateVectorError : public Error {
 public:
  explicit DegenerateVectorError(const std::string& msg) : Error("degenerate_vector", msg) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& msg) : Error("index", msg) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& msg) : Error("invalid_argument", msg) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& msg) : Error("state", msg) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error("format", msg) {}
};

class VersionError : public Error {
 public:
  explicit VersionError(const std::string& msg) : Error("version_mismatch", msg) {}
};

class MissingFileError : public Error {
 public:
  explicit MissingFileError(const std::string& msg) : Error("missing_file", msg) {}
};

class DigestMismatchError : public Error {
 public:
  explicit DigestMismatchError(const std::string& msg) : Error("digest_mismatch", msg) {}
};

}  // namespace k2v

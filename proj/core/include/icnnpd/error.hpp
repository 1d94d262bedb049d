#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace icnnpd {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

enum class ErrorKind {
  ShapeMismatch,
  InvalidArgument,
  DegenerateGeometry,
  Io,
  Format,
  MissingFile,
  Admissibility,
  Certification,
  NonFinite,
  Config,
};

const char* to_string(ErrorKind kind);

/// Base class of every error thrown by the library. The kind lets callers
/// branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ShapeError : public Error {
 public:
  ShapeError(const std::string& context, Shape expected, Shape actual);
  const Shape& expected() const noexcept { return expected_; }
  const Shape& actual() const noexcept { return actual_; }

 private:
  Shape expected_;
  Shape actual_;
};

/// Raised by the iterative solvers when an iterate stops being finite.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::size_t iteration, std::string block);
  std::size_t iteration() const noexcept { return iteration_; }
  const std::string& block() const noexcept { return block_; }

 private:
  std::size_t iteration_;
  std::string block_;
};

/// A step-size inequality that should hold by construction did not.
class CertificationError : public Error {
 public:
  CertificationError(std::string inequality, double value);
  const std::string& inequality() const noexcept { return inequality_; }
  double value() const noexcept { return value_; }

 private:
  std::string inequality_;
  double value_;
};

}  // namespace icnnpd

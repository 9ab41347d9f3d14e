#pragma once

#include <stdexcept>
#include <string>

namespace ligp {

/// Bad caller input: sizes, bounds, non-finite values.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Cholesky factorization failed even after the configured jitter.
class IllConditioned : public std::runtime_error {
 public:
  IllConditioned(const std::string& matrix, const std::string& detail)
      : std::runtime_error("ill-conditioned " + matrix + ": " + detail), matrix_(matrix) {}
  const std::string& matrix() const noexcept { return matrix_; }

 private:
  std::string matrix_;
};

/// Adding an inducing point would make K or Q singular (rho or upsilon <= 0).
class DegenerateUpdate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Point cloud has no spread (all points identical, zero distances).
class DegenerateGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text input could not be parsed; row/column are 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : std::runtime_error(what), row_(row), column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

}  // namespace ligp

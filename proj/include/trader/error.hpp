#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trader {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or argument violation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Row and column are 1-based; 0 means "not applicable".
class LoadError : public Error {
 public:
  LoadError(const std::string& what, std::size_t row = 0, std::size_t col = 0)
      : Error(what), row_(row), col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

/// A stored file does not match its recorded checksum or row count.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown inside the sampler. `index` is the failing pivot for
/// Cholesky failures and the iteration for chain-level failures (-1 if unknown).
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, long index = -1) : Error(what), index_(index) {}
  long index() const noexcept { return index_; }

 private:
  long index_;
};

}  // namespace trader

#pragma once

#include <stdexcept>
#include <string>

namespace cmn {

// Malformed input file (ragged rows, empty file, bad JSON shape).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A token that cannot be read as a category; carries 1-based location.
class ParseError : public FormatError {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : FormatError(what), row_(row), column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

// A dense table or blanket enumeration would exceed its configured cap.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A structure violates graph/context invariants (e.g. stale common neighbours).
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The likelihood optimiser hit its iteration limit.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double gradient_norm)
      : std::runtime_error(what), gradient_norm_(gradient_norm) {}
  double gradient_norm() const noexcept { return gradient_norm_; }

 private:
  double gradient_norm_;
};

}  // namespace cmn

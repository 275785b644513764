#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace jsdm {

/// Argument outside the mathematical domain of an operation (|rho| > 1, p not in (0,1), ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Shape, index or mode mismatch between otherwise valid objects.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Factorization or solve failure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Row and column are 1-based; 0 means "whole file" / "whole row".
class IngestError : public std::runtime_error {
 public:
  IngestError(std::string file, std::size_t row, std::size_t column, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(row) + ":" + std::to_string(column) + ": " + what),
        file_(std::move(file)),
        row_(row),
        column_(column) {}

  const std::string& file() const { return file_; }
  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  std::string file_;
  std::size_t row_;
  std::size_t column_;
};

}  // namespace jsdm

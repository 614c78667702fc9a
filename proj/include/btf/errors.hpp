// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <stdexcept>
#include <string>

namespace btf {

// Cholesky factorization failed even after the jitter retry.
class IndefiniteMatrixError : public std::runtime_error {
 public:
  IndefiniteMatrixError(int pivot, const std::string& what)
      : std::runtime_error(what), pivot_(pivot) {}
  // Index of the first non-positive pivot.
  int pivot() const { return pivot_; }

 private:
  int pivot_;
};

// A metric whose inclusion set is empty (e.g. every actual value is zero).
class UndefinedMetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File ingestion failure; the message carries the offending line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace btf

#pragma once

#include <stdexcept>
#include <string>

namespace ehrsurv {

// Bad input data (files, misaligned records, invalid values). The CLI maps
// this to exit code 1.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure inside an algorithm (non-finite likelihood, corrupted
// statistics). Also exit code 1 at the CLI boundary, but kept distinct so
// tests can tell the two apart.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ehrsurv

#pragma once

#include <stdexcept>
#include <string>

namespace lasi {

// I/O failures (missing files, malformed image payloads).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Contract violations on inputs (dimension mismatch, out-of-range values).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures (factorization did not converge, NaN in results).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lasi

#ifndef DCC_ERROR_HPP
#define DCC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace dcc {

// All library errors derive from Error and carry the process exit code the
// CLI maps them to: 2 for usage/data problems, 3 for numerical failures.
class Error : public std::runtime_error {
 public:
  Error(const std::string& msg, int exit_code)
      : std::runtime_error(msg), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg, 2) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg, 3) {}
};

// Malformed file magic, header, or payload.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// Label out of range, missing class, label/feature length mismatch.
class LabelError : public DataError {
 public:
  using DataError::DataError;
};

// Out-of-range or inconsistent parameters and configuration.
class ParamError : public DataError {
 public:
  using DataError::DataError;
};

// Unreadable or unwritable paths.
class IoError : public DataError {
 public:
  using DataError::DataError;
};

// Zero-norm feature row.
class DegenerateFeatureError : public DataError {
 public:
  using DataError::DataError;
};

// Regularized covariance too ill-conditioned to invert.
class ConditioningError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Rank-1 adjusted matrix exactly (or numerically) singular: |1 - p| below guard.
class SingularAdjustmentError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace dcc

#endif  // DCC_ERROR_HPP

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mtgp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Mismatched dimensions, empty inputs where data is required, etc.
class InputShapeError : public Error {
public:
  using Error::Error;
};

/// Cholesky factorization failed even after jitter escalation.
class IllConditionedError : public Error {
public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

class UndefinedCorrelationError : public Error {
public:
  using Error::Error;
};

class CalibrationError : public Error {
public:
  using Error::Error;
};

/// Malformed user-supplied data or configuration.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Every optimizer restart failed. what() carries per-restart diagnostics.
class TrainingFailedError : public Error {
public:
  using Error::Error;
};

inline void require_shape(bool ok, const std::string &what) {
  if (!ok) {
    throw InputShapeError(what);
  }
}

} // namespace mtgp

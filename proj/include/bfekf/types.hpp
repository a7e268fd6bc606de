#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bfekf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

// Error hierarchy. The C API maps each class onto a status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Mismatched vector/matrix dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration (bad key, non-PSD covariance, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite propagation, singular innovation covariance, divergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Operation not defined for the requested basis family or grid kind.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Optional instrumentation threaded through basis evaluation and filter
// updates. `flops` counts multiply-adds of the dominant products.
struct OpCounters {
  std::uint64_t basis_evaluations = 0;
  std::uint64_t flops = 0;
};

}  // namespace bfekf

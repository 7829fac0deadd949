// SPDX-License-Identifier: Apache-2.0
//
// Shared types, constants and the error type used across bstoa.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bstoa {

/// Speed of light in vacuum, m/s (exact SI value).
inline constexpr double kSpeedOfLight = 299'792'458.0;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Point3 = Eigen::Vector3d;

/// M x N matrix of subchannel delays in seconds. Row i is transmit antenna i,
/// column j is receive antenna j. Vectorization is column-major throughout.
using DelayMatrix = Eigen::MatrixXd;

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  SingularSystem,
  IndexOutOfRange,
  ConstraintViolated,
  WrongTopology,
  EmptyInput,
  UnderDetermined,
  SingularGeometry,
  ConfigInvalid,
  ParseError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::ConstraintViolated: return "ConstraintViolated";
    case ErrorKind::WrongTopology: return "WrongTopology";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::UnderDetermined: return "UnderDetermined";
    case ErrorKind::SingularGeometry: return "SingularGeometry";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Column-major vec(T).
inline Vector vec(const Matrix& t) {
  return Eigen::Map<const Vector>(t.data(), t.size());
}

/// Inverse of vec for an rows x cols matrix.
inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) {
    throw Error(ErrorKind::DimensionMismatch, "unvec: length does not match rows*cols");
  }
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace bstoa

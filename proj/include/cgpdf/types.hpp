#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace cgpdf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<Vector>;
using ConstVectorRef = Eigen::Ref<const Vector>;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: configuration, parameters, shapes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite or otherwise unusable value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace cgpdf

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace crossfit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

// Malformed input data or arguments.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A small dense system (p x p Gram, Hessian, bread) could not be solved.
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Variance or dispersion updates have no usable degrees of freedom.
class DegenerateFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An inner iteration hit its cap where the caller cannot use a partial answer.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense reference computations refuse problems above their size guard.
class SizeGuardError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace crossfit

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace otprop {

using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Bad input: malformed files, violated preconditions, inconsistent shapes.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// A solver could not produce a finite / feasible answer.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace otprop

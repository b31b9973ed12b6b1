// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace gwlab {

/// Invalid arguments or inconsistent input data.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Green function evaluated on the diagonal, where it is +infinity.
class DiagonalError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Operation not defined for the given surface or method.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Iterative solver hit its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_violation)
      : std::runtime_error(what), last_violation_(last_violation) {}

  double last_violation() const noexcept { return last_violation_; }

 private:
  double last_violation_;
};

}  // namespace gwlab

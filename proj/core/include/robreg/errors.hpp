#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace robreg {

// Caller violated a documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NoDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative solver gave up; the last iterate is kept for diagnostics.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd last_iterate,
                   double certificate)
      : std::runtime_error(what),
        last_iterate_(std::move(last_iterate)),
        certificate_(certificate) {}

  const Eigen::VectorXd& last_iterate() const { return last_iterate_; }
  double certificate() const { return certificate_; }

 private:
  Eigen::VectorXd last_iterate_;
  double certificate_;
};

}  // namespace robreg

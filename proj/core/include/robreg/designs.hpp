#pragma once

#include <Eigen/Dense>

#include "robreg/numerics.hpp"

namespace robreg {

struct DesignSpec {
  enum class Kind { kGaussian, kGeneralized };

  Kind kind = Kind::kGaussian;
  double gamma = 2.0;  // only read for kGeneralized
  int dim = 1;

  static DesignSpec gaussian(int p) { return {Kind::kGaussian, 2.0, p}; }
  static DesignSpec generalized(double gamma, int p = 1) {
    return {Kind::kGeneralized, gamma, p};
  }
};

void validate(const DesignSpec& spec);

// Fills one covariate row; consumes the same draws as sample_design per row.
void sample_design_row(const DesignSpec& spec, RngStream& rng, double* row);

Eigen::MatrixXd sample_design(const DesignSpec& spec, int n, RngStream& rng);

}  // namespace robreg

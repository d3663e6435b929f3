#include "robreg/designs.hpp"

#include "robreg/errors.hpp"

namespace robreg {

void validate(const DesignSpec& spec) {
  if (spec.dim < 1) throw PreconditionError("design: dim must be positive");
  if (spec.kind == DesignSpec::Kind::kGeneralized) {
    if (!(spec.gamma > 0.0)) {
      throw PreconditionError("design: gamma must be positive");
    }
    if (spec.gamma != 2.0 && spec.dim > 1) {
      throw UnsupportedError(
          "design: generalized Gaussian with gamma != 2 is only available for p = 1");
    }
  }
}

void sample_design_row(const DesignSpec& spec, RngStream& rng, double* row) {
  if (spec.kind == DesignSpec::Kind::kGeneralized && spec.dim == 1) {
    row[0] = sample_gen_gaussian_1d(spec.gamma, rng);
    return;
  }
  for (int j = 0; j < spec.dim; ++j) row[j] = rng.normal();
}

Eigen::MatrixXd sample_design(const DesignSpec& spec, int n, RngStream& rng) {
  validate(spec);
  if (n < 1) throw PreconditionError("sample_design: n must be positive");
  // Row-major fill keeps the draw order independent of storage layout.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X(n, spec.dim);
  for (int i = 0; i < n; ++i) sample_design_row(spec, rng, X.row(i).data());
  return X;
}

}  // namespace robreg

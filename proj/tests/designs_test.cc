#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "robreg/designs.hpp"
#include "robreg/errors.hpp"

namespace robreg {
namespace {

TEST(Designs, GaussianColumnMomentsP3) {
  RngStream rng(100, 0);
  const int n = 100000;
  const Eigen::MatrixXd X = sample_design(DesignSpec::gaussian(3), n, rng);
  ASSERT_EQ(X.rows(), n);
  ASSERT_EQ(X.cols(), 3);
  const Eigen::RowVectorXd mean = X.colwise().mean();
  for (int j = 0; j < 3; ++j) EXPECT_LT(std::abs(mean(j)), 4.0 / std::sqrt(n));
  const Eigen::MatrixXd cov = X.transpose() * X / n;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      // sd of x_a x_b is sqrt(2) on the diagonal and 1 off it.
      const double sd = a == b ? std::sqrt(2.0) : 1.0;
      EXPECT_NEAR(cov(a, b), a == b ? 1.0 : 0.0, 5.0 * sd / std::sqrt(n));
    }
  }
}

TEST(Designs, GeneralizedGammaTwoMatchesGaussian) {
  RngStream a(101, 0), b(101, 1);
  const int n = 100000;
  Eigen::VectorXd g = sample_design(DesignSpec::generalized(2.0), n, a).col(0);
  Eigen::VectorXd z = sample_design(DesignSpec::gaussian(1), n, b).col(0);
  std::sort(g.data(), g.data() + n);
  std::sort(z.data(), z.data() + n);
  double d = 0.0;
  for (int k = 0; k < n; k += 50) {
    const double v = g(k);
    const double fz = static_cast<double>(std::upper_bound(z.data(), z.data() + n, v) - z.data()) / n;
    d = std::max(d, std::abs((k + 1.0) / n - fz));
  }
  EXPECT_LT(d, 1.95 * std::sqrt(2.0 / n) + 1.0 / n);
}

TEST(Designs, LaplaceKurtosis) {
  RngStream rng(102, 0);
  const int n = 200000;
  const Eigen::VectorXd x = sample_design(DesignSpec::generalized(1.0), n, rng).col(0);
  const double m2 = x.array().square().mean();
  const double m4 = x.array().square().square().mean();
  // Delta-method variance of the sample kurtosis under the Laplace law is 2484 / n.
  EXPECT_NEAR(m4 / (m2 * m2), 6.0, 5.0 * std::sqrt(2484.0 / n));
}

TEST(Designs, RowSamplerMatchesMatrixSampler) {
  RngStream a(103, 4), b(103, 4);
  const DesignSpec spec = DesignSpec::gaussian(4);
  const Eigen::MatrixXd X = sample_design(spec, 10, a);
  double row[4];
  for (int i = 0; i < 10; ++i) {
    sample_design_row(spec, b, row);
    for (int j = 0; j < 4; ++j) EXPECT_EQ(X(i, j), row[j]);
  }
}

TEST(Designs, Preconditions) {
  EXPECT_THROW(validate(DesignSpec::generalized(1.0, 3)), UnsupportedError);
  EXPECT_THROW(validate(DesignSpec::generalized(-1.0)), PreconditionError);
  EXPECT_THROW(validate(DesignSpec::gaussian(0)), PreconditionError);
  EXPECT_NO_THROW(validate(DesignSpec::generalized(2.0, 3)));
  RngStream rng(104, 0);
  EXPECT_THROW(sample_design(DesignSpec::gaussian(2), 0, rng), PreconditionError);
}

}  // namespace
}  // namespace robreg

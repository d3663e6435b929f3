#include "robreg/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "robreg/errors.hpp"

namespace robreg {

double choose_t(const TruncationPolicy& policy, long long n, int p, double epsilon) {
  if (n < 1 || p < 1 || !(epsilon >= 0.0 && epsilon < 0.5)) {
    throw PreconditionError("choose_t: need n >= 1, p >= 1, eps in [0, 1/2)");
  }
  const double nd = static_cast<double>(n);
  const double pd = static_cast<double>(p);
  const double e = std::numbers::e;
  const double eps2 = epsilon * epsilon;
  switch (policy.kind) {
    case TruncationPolicy::Kind::kFixed:
      if (!(policy.value >= 0.0)) {
        throw PreconditionError("choose_t: fixed t must be non-negative");
      }
      return policy.value;
    case TruncationPolicy::Kind::kThm1: {
      const double t = std::sqrt(0.5 * std::log(nd * eps2 + e));
      const double cap = std::sqrt(std::max(0.0, 0.9 * std::log(nd)));
      return std::clamp(t, 0.0, cap);
    }
    case TruncationPolicy::Kind::kThm2: {
      const double t = 0.5 * std::sqrt(std::log(nd * eps2 / pd + e));
      const double cap = std::sqrt(std::max(0.0, 0.4 * std::log(nd / pd)));
      return std::clamp(t, 0.0, cap);
    }
    case TruncationPolicy::Kind::kThm5: {
      if (!(policy.value > 0.0)) {
        throw PreconditionError("choose_t: gamma must be positive");
      }
      return std::pow(std::log(nd * eps2 / pd + e) / 3.0, 1.0 / policy.value);
    }
  }
  return 0.0;
}

FitReport truncated_lad_1d(std::span<const double> x, std::span<const double> y,
                           double t) {
  if (x.size() != y.size()) {
    throw PreconditionError("truncated_lad_1d: x and y differ in length");
  }
  if (!(t >= 0.0)) throw PreconditionError("truncated_lad_1d: t must be non-negative");
  std::vector<double> ratios;
  std::vector<double> weights;
  ratios.reserve(x.size());
  weights.reserve(x.size());
  double zero_x_loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double ax = std::abs(x[i]);
    if (ax < t) continue;
    if (ax == 0.0) {
      zero_x_loss += std::abs(y[i]);
      continue;
    }
    ratios.push_back(y[i] / x[i]);
    weights.push_back(ax);
  }
  if (ratios.empty()) {
    throw NoDataError("truncated_lad_1d: no observation survives the truncation");
  }
  const double b = weighted_median(ratios, weights);
  FitReport out;
  out.beta_hat = Eigen::VectorXd::Constant(1, b);
  double obj = zero_x_loss;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) >= t) obj += std::abs(y[i] - b * x[i]);
  }
  out.objective = obj;
  out.iterations = 1;
  return out;
}

FitReport ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size() || X.rows() < X.cols()) {
    throw PreconditionError("ols_fit: need n >= p and matching lengths");
  }
  FitReport out;
  out.beta_hat = X.colPivHouseholderQr().solve(y);
  out.objective = (y - X * out.beta_hat).squaredNorm() / static_cast<double>(y.size());
  out.iterations = 1;
  return out;
}

}  // namespace robreg

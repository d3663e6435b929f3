#pragma once

#include <span>

#include <Eigen/Dense>

#include "robreg/numerics.hpp"

namespace robreg {

struct TruncationPolicy {
  enum class Kind { kFixed, kThm1, kThm2, kThm5 };

  Kind kind = Kind::kThm1;
  double value = 0.0;  // t for kFixed, gamma for kThm5

  static TruncationPolicy fixed(double t) { return {Kind::kFixed, t}; }
  static TruncationPolicy thm1() { return {Kind::kThm1, 0.0}; }
  static TruncationPolicy thm2() { return {Kind::kThm2, 0.0}; }
  static TruncationPolicy thm5(double gamma) { return {Kind::kThm5, gamma}; }
};

double choose_t(const TruncationPolicy& policy, long long n, int p, double epsilon);

struct FitReport {
  Eigen::VectorXd beta_hat;
  double objective = 0.0;
  double certificate = 0.0;
  int iterations = 0;
};

// Exact minimizer of sum |y_i - b x_i| 1{|x_i| >= t}.
FitReport truncated_lad_1d(std::span<const double> x, std::span<const double> y,
                           double t);

// Ordinary least squares; baseline only.
FitReport ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

struct LadOptions {
  double inner_tol = 1e-10;
  double mu_floor = 1e-8;        // relative to the response scale
  double certificate_tol = 1e-6; // relative to the column scale
  int max_inner = 2000;
  int max_total = 200000;
  bool polish = true;
};

FitReport lad_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const LadOptions& options = {});

// Directions are the columns of a p x M matrix.
double depth_eval(const Eigen::VectorXd& beta, const Eigen::MatrixXd& X,
                  const Eigen::VectorXd& y, double t,
                  const Eigen::MatrixXd& directions);

struct DepthOptions {
  int max_dim = 5;
  int directions_per_dim = 256;
  int restarts = 4;
  int max_evals = 400;  // per start, scaled by p
};

FitReport depth_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double t,
                    const DepthOptions& options, RngStream& rng);

// Random unit directions, p x count.
Eigen::MatrixXd random_directions(int p, int count, RngStream& rng);

}  // namespace robreg

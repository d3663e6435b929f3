#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace robreg {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrtHalfPi = 1.25331413731550025;  // sqrt(pi/2)

std::uint64_t splitmix64(std::uint64_t x);

// Reproducible random stream identified by (base_seed, stream_id).
class RngStream {
 public:
  RngStream(std::uint64_t base_seed, std::uint64_t stream_id);

  std::uint64_t base_seed() const { return base_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1).
  double uniform();
  // Uniform on (0, 1].
  double uniform_pos();
  double normal();
  double gamma(double shape, double scale);
  // +1 or -1 with equal probability.
  double sign();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t base_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

double normal_pdf(double x);
double normal_cdf(double x);
// Density of N(mean, var) at x.
double normal_pdf(double x, double mean, double var);

double sample_gen_gaussian_1d(double gamma, RngStream& rng);

class Grid1D {
 public:
  Grid1D() = default;
  explicit Grid1D(std::vector<double> nodes);

  static Grid1D uniform(double lo, double hi, std::size_t count);
  // Uniform on [-L, L] with L = max(10, sqrt(32 m) + 2).
  static Grid1D hardness_default(int m, std::size_t count = 4001);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  double lo() const { return nodes_.front(); }
  double hi() const { return nodes_.back(); }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

double integrate_grid(std::span<const double> f, const Grid1D& grid);

class TabulatedDensity {
 public:
  TabulatedDensity() = default;
  // Values must be non-negative up to -1e-12; tiny negatives are clamped.
  TabulatedDensity(Grid1D grid, std::vector<double> values);

  const Grid1D& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& cdf() const { return cdf_; }
  // Quadrature integral of the raw values.
  double mass() const { return mass_; }
  bool mass_ok(double tol = 1e-6) const;

  // Linear interpolation; zero outside the grid.
  double operator()(double x) const;
  // Inverse-CDF draw, linear between grid nodes.
  double sample(RngStream& rng) const;
  double quantile(double u) const;

 private:
  Grid1D grid_;
  std::vector<double> values_;
  std::vector<double> cdf_;
  double mass_ = 0.0;
};

double weighted_median(std::span<const double> values,
                       std::span<const double> weights);

struct ChebSolution {
  Eigen::VectorXd r;
  double norm = 0.0;           // max |r_k|
  double lower_bound = 0.0;    // dual certificate
  double residual = 0.0;       // max |A r - b|
  int iterations = 0;
};

// min ||r||_inf subject to A r = b.
ChebSolution cheb_min_inf_solve(const Eigen::MatrixXd& A,
                                const Eigen::VectorXd& b);

}  // namespace robreg

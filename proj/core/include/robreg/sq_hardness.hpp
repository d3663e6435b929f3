#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "robreg/contamination.hpp"
#include "robreg/numerics.hpp"

namespace robreg {

// Normalized probabilists' Hermite polynomial he_k.
double hermite_eval(int k, double x);
// he_0..he_k at x, written into out (size k + 1).
void hermite_all(int k, double x, double* out);

// |E he_i(rho mu + sqrt(1 - rho^2) G) - rho^i he_i(mu)| by quadrature.
double hermite_shift_identity_check(int i, double rho, double mu);

struct GTables {
  Grid1D grid;
  std::vector<std::vector<double>> g_over_phi;  // r_i on the grid, i = 1..m
  std::vector<double> achieved_B;
  std::vector<double> target_B;
  std::vector<double> lp_lower_bound;
  double max_moment_residual = 0.0;  // max |int he_j g_i - 1{i=j}|
};

double target_bound(int i, int m);

GTables build_g(int m, const Grid1D& grid_x);

struct HardVerification {
  double moment_residual = 0.0;    // A_y moments over the 41-point y-grid
  double marginal_residual = 0.0;  // sup_x |int D D_y dy - phi|
  double fluctuation_excess = 0.0; // max(|f_y| - phi, 0) over grids
  double min_Ay = 0.0;
  double ay_mass_residual = 0.0;
  double g_moment_residual = 0.0;
  double mass_D = 0.0;
  double mass_R = 0.0;
};

class HardInstance {
 public:
  // m = 0 or eps = 0 give the uncontaminated Gaussian model.
  static HardInstance build(int m, double epsilon, double delta);
  static HardInstance build(int m, double epsilon, double delta,
                            const Grid1D& grid);

  int m() const { return m_; }
  double epsilon() const { return epsilon_; }
  double delta() const { return delta_; }
  double sigma2() const { return 1.0 - delta_ * delta_; }
  double kappa() const { return kappa_; }
  const Grid1D& grid_x() const { return grid_x_; }
  const Grid1D& grid_y() const { return grid_y_; }
  const std::vector<std::vector<double>>& g_over_phi() const { return g_over_phi_; }
  const std::vector<double>& achieved_B() const { return achieved_B_; }
  const std::vector<double>& target_B() const { return target_B_; }
  const TabulatedDensity& D() const { return D_; }
  const TabulatedDensity& R() const { return R_; }

  // a_i(y) = -((1 - eps)/eps) delta^i he_i(y).
  double a(int i, double y) const;
  double D_at(double y) const;
  double R_at(double y) const;
  // r_i(x) = g_i(x)/phi(x), linear between grid nodes.
  double g_over_phi_at(int i, double x) const;
  // f_y(x) / phi(x).
  double fluctuation_ratio(double y, double x) const;
  double density_Ay(double y, double x) const;
  // E_x(y) = D(y) + phi(y) sum_i a_i(y) g_i(x)/phi(x), tabulated on grid_y.
  TabulatedDensity E_x(double x) const;

  HardVerification verify() const;
  double chi2_avg() const;

  ContaminatedSample sample_alt(const Eigen::VectorXd& v, int n, RngStream& rng) const;
  ContaminatedSample sample_null(int p, int n, RngStream& rng) const;
  // Outlier response given the projected covariate.
  double sample_outlier(double x_proj, RngStream& rng) const;

  void export_text(std::ostream& os) const;
  static HardInstance import_text(std::istream& is);

 private:
  void finish();

  int m_ = 0;
  double epsilon_ = 0.0;
  double delta_ = 0.0;
  Grid1D grid_x_;
  Grid1D grid_y_;
  std::vector<std::vector<double>> g_over_phi_;
  std::vector<double> achieved_B_;
  std::vector<double> target_B_;
  double kappa_ = 0.0;
  TabulatedDensity D_;
  TabulatedDensity R_;
  std::vector<double> phi_y_;
  std::vector<std::vector<double>> a_grid_;  // a_i on grid_y
};

// Sample z-scores of (1/n) sum he_j(v'X_i) he_l(y_i), j = 1..m, l = 0..4.
Eigen::MatrixXd hermite_probe(const ContaminatedSample& sample,
                              const Eigen::VectorXd& v, int m);

}  // namespace robreg

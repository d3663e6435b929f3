#pragma once

#include <functional>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "robreg/designs.hpp"
#include "robreg/numerics.hpp"

namespace robreg {

class HardInstance;

namespace adversary {

// Flagged rows follow the clean law; useful as a control.
struct None {};
struct PointMass {
  double y0 = 0.0;
};
// Q_x = N(-x'beta, sigma^2).
struct FlipSign {};
// y = x'beta + g with g ~ Q, independent of x.
struct ObliviousNoise {
  std::shared_ptr<const TabulatedDensity> Q;
};
// y ~ Q, independent of x.
struct ObliviousResponse {
  std::shared_ptr<const TabulatedDensity> Q;
};
// Imitates beta + delta * u where u is the direction of beta (e_1 if beta = 0).
struct MatchedPair {
  double delta = 0.0;
};
// Flag probability eps_x = TV/(1+TV) between N(x'beta, s2) and N(-x'beta, s2).
struct NonuniformLb {};
// Flagged rows get y = x'beta + z + magnitude.
struct SparseAdditive {
  double magnitude = 0.0;
};
struct HardSq {
  std::shared_ptr<const HardInstance> instance;
  Eigen::VectorXd v;
};
// Arbitrary outlier law given the covariate row.
struct Conditional {
  std::function<double(std::span<const double> x, RngStream& rng)> sample;
};

}  // namespace adversary

using AdversarySpec =
    std::variant<adversary::None, adversary::PointMass, adversary::FlipSign,
                 adversary::ObliviousNoise, adversary::ObliviousResponse,
                 adversary::MatchedPair, adversary::NonuniformLb,
                 adversary::SparseAdditive, adversary::HardSq,
                 adversary::Conditional>;

struct ModelSpec {
  Eigen::VectorXd beta;
  double sigma = 1.0;
  double epsilon = 0.0;
  DesignSpec design;
  AdversarySpec adversary;
};

struct ContaminatedSample {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<bool> inlier_mask;  // diagnostics only

  int n() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(X.cols()); }
};

void validate(const ModelSpec& model);

ContaminatedSample generate(const ModelSpec& model, int n, RngStream& rng);

// (1/n) sum y_i X_i under the flip adversary; population value (1 - 2 eps) beta.
Eigen::VectorXd flip_adversary_moment_check(const ModelSpec& model, int n,
                                            RngStream& rng);

// Positive part (N(to, s2) - N(from, s2))_+ normalized to a density.
TabulatedDensity gaussian_excess_density(double from, double to, double sigma,
                                         std::size_t nodes = 20001);

struct NonuniformLbAt {
  double eps_x = 0.0;
  TabulatedDensity P;
  TabulatedDensity P_alt;
  TabulatedDensity Qx;
  TabulatedDensity Qx_alt;
  TabulatedDensity M;
  double mixture_residual = 0.0;  // sup over the y-grid of both identities
};

class NonuniformLb {
 public:
  NonuniformLb(Eigen::VectorXd beta, double sigma, std::size_t nodes = 20001);

  double tv(std::span<const double> x) const;
  double eps_x(std::span<const double> x) const;
  NonuniformLbAt at(std::span<const double> x) const;
  // E[eps_X] for X ~ N(0, I_p).
  double mean_eps() const;

  const Eigen::VectorXd& beta() const { return beta_; }
  double sigma() const { return sigma_; }

 private:
  Eigen::VectorXd beta_;
  double sigma_;
  std::size_t nodes_;
};

NonuniformLb build_nonuniform_lb(const Eigen::VectorXd& beta, double sigma);

// Huber pair with bounded marginal likelihood built from the two-model
// construction along beta; returns max over the grid of eps Q(x) / phi(x).
double huber_pair_max_ratio(double beta_norm, double sigma, const Grid1D& x_grid);

}  // namespace robreg

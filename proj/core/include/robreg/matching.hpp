#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "robreg/numerics.hpp"

namespace robreg {

struct GaussianFamily {
  std::vector<double> means;
  double sigma = 1.0;
};

void validate(const GaussianFamily& family);

// Interval region [lo, hi] on which member j attains max_k p_k (first
// maximizer wins ties); empty regions have lo == hi.
struct Region {
  double lo = 0.0;
  double hi = 0.0;
};

std::vector<Region> max_regions(const GaussianFamily& family);

// Multi-distribution TV: integral of max_k p_k minus 1.
double multi_tv_gaussian(const GaussianFamily& family);

// (max theta - min theta) / (sqrt(2 pi) sigma).
double multi_tv_upper_bound(const GaussianFamily& family);

inline constexpr std::size_t kMatchingGridNodes = 20001;

// y-grid with tail cutoff +-(max|theta| + 10 sigma).
Grid1D matching_grid(const GaussianFamily& family,
                     std::size_t nodes = kMatchingGridNodes);

struct MatchingBundle {
  std::vector<TabulatedDensity> q;
  TabulatedDensity mixture;
  double epsilon_used = 0.0;
  double blend = 0.0;  // delta with TV = delta / (1 - delta)
  std::vector<Region> regions;
  double mixture_residual = 0.0;
  double min_q = 0.0;
  double max_mass_error = 0.0;
};

MatchingBundle build_matching(const GaussianFamily& family, double epsilon,
                              std::size_t nodes = kMatchingGridNodes);

// sum_j int_{A_j} p_j - 1 over the bundle's regions.
double partition_tv(const GaussianFamily& family, const MatchingBundle& bundle);

struct KlBundle {
  std::vector<TabulatedDensity> q;
  std::vector<int> matched;  // indices with |theta_j| <= sqrt(pi/2) eps sigma
  Eigen::MatrixXd kl_matrix;
  Eigen::MatrixXd kl_bound;
};

KlBundle corollary1_bundle(const GaussianFamily& family, double epsilon,
                           std::size_t nodes = kMatchingGridNodes);

double fano_delta(double n, int p, double sigma, double epsilon);

// 4 E_G (2 delta |G| / sigma - sqrt(pi/2) eps)_+^2: the pairwise KL bound
// averaged over a standard Gaussian projection.
double kl_bound_expectation(double delta, double sigma, double epsilon);

// Unit vectors with pairwise distance > 1/2 by greedy rejection sampling.
std::vector<Eigen::VectorXd> sphere_packing(int p, int count, RngStream& rng,
                                            int max_tries = 100000);

}  // namespace robreg

#include "robreg/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "robreg/errors.hpp"

namespace robreg {
namespace {

std::vector<double> member_pdf(const Grid1D& grid, double mean, double sigma) {
  std::vector<double> out(grid.size());
  const double var = sigma * sigma;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out[k] = normal_pdf(grid.nodes()[k], mean, var);
  }
  return out;
}

// max_k p_k on the grid using the region partition.
std::vector<double> region_max(const GaussianFamily& family,
                               const std::vector<Region>& regions,
                               const Grid1D& grid) {
  std::vector<double> out(grid.size(), 0.0);
  const double var = family.sigma * family.sigma;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double y = grid.nodes()[k];
    for (std::size_t j = 0; j < regions.size(); ++j) {
      if (regions[j].lo < regions[j].hi && y >= regions[j].lo && y <= regions[j].hi) {
        out[k] = std::max(out[k], normal_pdf(y, family.means[j], var));
      }
    }
  }
  return out;
}

struct MixtureTables {
  std::vector<std::vector<double>> q;
  std::vector<double> mixture;
  double blend = 0.0;
};

MixtureTables mixture_tables(const GaussianFamily& family, double epsilon, const Grid1D& grid,
                    const std::vector<Region>& regions) {
  const double tv = multi_tv_gaussian(family);
  const double blend = tv / (1.0 + tv);
  const std::vector<double> top = region_max(family, regions, grid);
  MixtureTables out;
  out.blend = blend;
  out.mixture.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) out.mixture[k] = (1.0 - blend) * top[k];
  for (double mean : family.means) {
    std::vector<double> p = member_pdf(grid, mean, family.sigma);
    std::vector<double> q(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      q[k] = ((epsilon - blend) / epsilon) * p[k] +
             ((1.0 - blend) / epsilon) * std::max(top[k] - p[k], 0.0);
    }
    out.q.push_back(std::move(q));
  }
  return out;
}

}  // namespace

void validate(const GaussianFamily& family) {
  if (family.means.size() < 2) throw PreconditionError("family: need m >= 2 means");
  if (!(family.sigma > 0.0)) throw PreconditionError("family: sigma must be positive");
  for (double m : family.means) {
    if (!std::isfinite(m)) throw PreconditionError("family: means must be finite");
  }
}

std::vector<Region> max_regions(const GaussianFamily& family) {
  const std::size_t m = family.means.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return family.means[a] < family.means[b];
  });
  std::vector<std::size_t> owners;
  for (std::size_t idx : order) {
    if (owners.empty() || family.means[idx] > family.means[owners.back()]) {
      owners.push_back(idx);
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<Region> regions(m);
  for (std::size_t j = 0; j < m; ++j) regions[j] = {family.means[j], family.means[j]};
  for (std::size_t k = 0; k < owners.size(); ++k) {
    const double lo = k == 0 ? -inf
                             : 0.5 * (family.means[owners[k - 1]] + family.means[owners[k]]);
    const double hi = k + 1 == owners.size()
                          ? inf
                          : 0.5 * (family.means[owners[k]] + family.means[owners[k + 1]]);
    regions[owners[k]] = {lo, hi};
  }
  return regions;
}

double multi_tv_gaussian(const GaussianFamily& family) {
  validate(family);
  const std::vector<Region> regions = max_regions(family);
  double total = 0.0;
  for (std::size_t j = 0; j < regions.size(); ++j) {
    if (!(regions[j].lo < regions[j].hi)) continue;
    const double theta = family.means[j];
    total += normal_cdf((regions[j].hi - theta) / family.sigma) -
             normal_cdf((regions[j].lo - theta) / family.sigma);
  }
  return std::max(total - 1.0, 0.0);
}

double multi_tv_upper_bound(const GaussianFamily& family) {
  validate(family);
  const auto [lo, hi] = std::minmax_element(family.means.begin(), family.means.end());
  return (*hi - *lo) / (std::sqrt(2.0 * kPi) * family.sigma);
}

Grid1D matching_grid(const GaussianFamily& family, std::size_t nodes) {
  double reach = 0.0;
  for (double m : family.means) reach = std::max(reach, std::abs(m));
  reach += 10.0 * family.sigma;
  return Grid1D::uniform(-reach, reach, nodes);
}

MatchingBundle build_matching(const GaussianFamily& family, double epsilon,
                              std::size_t nodes) {
  validate(family);
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw PreconditionError("build_matching: epsilon must lie in (0, 1)");
  }
  const double tv = multi_tv_gaussian(family);
  const double threshold = epsilon / (1.0 - epsilon);
  if (tv > threshold * (1.0 + 1e-12)) {
    throw InfeasibleError("build_matching: multi-TV exceeds eps / (1 - eps)");
  }
  const Grid1D grid = matching_grid(family, nodes);
  MatchingBundle out;
  out.regions = max_regions(family);
  MixtureTables tables = mixture_tables(family, epsilon, grid, out.regions);
  out.epsilon_used = epsilon;
  out.blend = std::min(tables.blend, epsilon);

  out.min_q = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < tables.q.size(); ++j) {
    const std::vector<double> p = member_pdf(grid, family.means[j], family.sigma);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double lhs = (1.0 - epsilon) * p[k] + epsilon * tables.q[j][k];
      out.mixture_residual = std::max(out.mixture_residual, std::abs(lhs - tables.mixture[k]));
      out.min_q = std::min(out.min_q, tables.q[j][k]);
    }
    out.max_mass_error =
        std::max(out.max_mass_error, std::abs(integrate_grid(tables.q[j], grid) - 1.0));
    out.q.emplace_back(grid, std::move(tables.q[j]));
  }
  out.mixture = TabulatedDensity(grid, std::move(tables.mixture));
  return out;
}

double partition_tv(const GaussianFamily& family, const MatchingBundle& bundle) {
  double total = 0.0;
  for (std::size_t j = 0; j < bundle.regions.size(); ++j) {
    const Region& r = bundle.regions[j];
    if (!(r.lo < r.hi)) continue;
    total += normal_cdf((r.hi - family.means[j]) / family.sigma) -
             normal_cdf((r.lo - family.means[j]) / family.sigma);
  }
  return total - 1.0;
}

KlBundle corollary1_bundle(const GaussianFamily& family, double epsilon,
                           std::size_t nodes) {
  validate(family);
  if (!(epsilon >= 0.0 && epsilon < 0.5)) {
    throw PreconditionError("corollary1_bundle: epsilon must lie in [0, 1/2)");
  }
  const std::size_t m = family.means.size();
  const double sigma = family.sigma;
  const double radius = kSqrtHalfPi * epsilon * sigma;
  const Grid1D grid = matching_grid(family, nodes);

  KlBundle out;
  for (std::size_t j = 0; j < m; ++j) {
    if (std::abs(family.means[j]) <= radius) out.matched.push_back(static_cast<int>(j));
  }

  std::vector<std::vector<double>> q(m);
  std::vector<double> fallback;
  if (out.matched.empty()) {
    fallback = member_pdf(grid, 0.0, sigma);
  } else if (out.matched.size() == 1) {
    fallback = member_pdf(grid, family.means[out.matched[0]], sigma);
    q[out.matched[0]] = fallback;
  } else {
    GaussianFamily sub{{}, sigma};
    for (int j : out.matched) sub.means.push_back(family.means[j]);
    const MixtureTables tables = mixture_tables(sub, epsilon, grid, max_regions(sub));
    for (std::size_t k = 0; k < out.matched.size(); ++k) q[out.matched[k]] = tables.q[k];
    fallback = q[out.matched.front()];
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (q[j].empty()) q[j] = fallback;
  }

  std::vector<std::vector<double>> mix(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::vector<double> p = member_pdf(grid, family.means[j], sigma);
    mix[j].resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      mix[j][k] = (1.0 - epsilon) * p[k] + epsilon * q[j][k];
    }
  }

  out.kl_matrix = Eigen::MatrixXd::Zero(m, m);
  out.kl_bound = Eigen::MatrixXd::Zero(m, m);
  auto term = [&](double theta) {
    const double v = std::max(2.0 * std::abs(theta) / sigma - kSqrtHalfPi * epsilon, 0.0);
    return 2.0 * v * v;
  };
  std::vector<double> integrand(grid.size());
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < m; ++k) {
      out.kl_bound(j, k) = term(family.means[j]) + term(family.means[k]);
      if (j == k) continue;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double a = mix[j][i];
        const double b = mix[k][i];
        integrand[i] = a > 0.0 ? a * std::log(a / b) : 0.0;
      }
      out.kl_matrix(j, k) = integrate_grid(integrand, grid);
    }
  }
  for (std::size_t j = 0; j < m; ++j) out.q.emplace_back(grid, std::move(q[j]));
  return out;
}

double fano_delta(double n, int p, double sigma, double epsilon) {
  if (!(n >= 1.0) || p < 1) throw PreconditionError("fano_delta: need n, p >= 1");
  if (!(sigma > 0.0)) throw PreconditionError("fano_delta: sigma must be positive");
  constexpr int kPoints = 4000;
  constexpr double kLo = 1e-3;
  constexpr double kHi = 20.0;
  const double c = 0.25 * std::sqrt(p * std::log(2.0) / (std::sqrt(2.0) * n));
  const double a = kSqrtHalfPi * epsilon;
  const double log_lo = std::log10(kLo);
  const double step = (std::log10(kHi) - log_lo) / (kPoints - 1);
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kPoints; ++k) {
    const double t = std::pow(10.0, log_lo + k * step);
    best = std::min(best, sigma / (2.0 * t) * (a + c * std::exp(t * t / 8.0)));
  }
  return best;
}

double kl_bound_expectation(double delta, double sigma, double epsilon) {
  const double a = 2.0 * delta / sigma;
  if (!(a > 0.0)) return 0.0;
  const double c = kSqrtHalfPi * epsilon / a;
  const double half = a * a * ((1.0 + c * c) * normal_cdf(-c) - c * normal_pdf(c));
  return 4.0 * 2.0 * half;
}

std::vector<Eigen::VectorXd> sphere_packing(int p, int count, RngStream& rng,
                                            int max_tries) {
  if (p < 1 || count < 1) throw PreconditionError("sphere_packing: need p, count >= 1");
  std::vector<Eigen::VectorXd> pts;
  for (int tries = 0; tries < max_tries && static_cast<int>(pts.size()) < count; ++tries) {
    Eigen::VectorXd v(p);
    for (int j = 0; j < p; ++j) v(j) = rng.normal();
    const double norm = v.norm();
    if (norm == 0.0) continue;
    v /= norm;
    bool ok = true;
    for (const auto& u : pts) {
      if ((u - v).norm() <= 0.5) {
        ok = false;
        break;
      }
    }
    if (ok) pts.push_back(std::move(v));
  }
  return pts;
}

}  // namespace robreg

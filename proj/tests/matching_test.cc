#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "goldens.hpp"
#include "robreg/errors.hpp"
#include "robreg/matching.hpp"

namespace robreg {
namespace {

// 2 Phi(a) - 1 = target, by bisection.
double half_gap_for_tv(double target) {
  double lo = 0.0, hi = 10.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (2.0 * normal_cdf(mid) - 1.0 < target ? lo : hi) = mid;
  }
  return lo;
}

double grid_multi_tv(const GaussianFamily& f) {
  const Grid1D g = Grid1D::uniform(-40.0, 40.0, 400001);
  std::vector<double> v(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    double best = 0.0;
    for (double th : f.means) best = std::max(best, normal_pdf(g.nodes()[k], th, f.sigma * f.sigma));
    v[k] = best;
  }
  return integrate_grid(v, g) - 1.0;
}

void expect_bundle_valid(const GaussianFamily& f, double eps, const MatchingBundle& b) {
  ASSERT_EQ(b.q.size(), f.means.size());
  EXPECT_GE(b.min_q, 0.0);
  EXPECT_LE(b.max_mass_error, 1e-6);
  EXPECT_LE(b.mixture_residual, 1e-8);
  for (std::size_t j = 0; j < f.means.size(); ++j) {
    const TabulatedDensity& q = b.q[j];
    double resid = 0.0;
    for (std::size_t k = 0; k < q.grid().size(); ++k) {
      const double x = q.grid().nodes()[k];
      const double mix = (1.0 - eps) * normal_pdf(x, f.means[j], f.sigma * f.sigma) + eps * q.values()[k];
      resid = std::max(resid, std::abs(mix - b.mixture.values()[k]));
    }
    EXPECT_LE(resid, 1e-8) << "member " << j;
  }
  EXPECT_NEAR(partition_tv(f, b), multi_tv_gaussian(f), 1e-10);
}

TEST(MultiTv, IdenticalMembersGiveZero) {
  EXPECT_NEAR(multi_tv_gaussian({{0.3, 0.3, 0.3}, 1.0}), 0.0, 1e-15);
}

TEST(MultiTv, TwoPointClosedForm) {
  for (double d : {0.1, 1.0, 2.5}) {
    for (double sigma : {0.5, 1.0, 2.0}) {
      EXPECT_NEAR(multi_tv_gaussian({{0.0, d}, sigma}), 2.0 * normal_cdf(d / (2.0 * sigma)) - 1.0,
                  1e-10);
    }
  }
  EXPECT_NEAR(multi_tv_gaussian({{0.0, 1.0}, 1.0}), 0.38292492254802624, 1e-10);
}

TEST(MultiTv, MatchesGridQuadratureAndRangeBound) {
  RngStream rng(400, 0);
  for (int trial = 0; trial < 10; ++trial) {
    GaussianFamily f{{}, 0.5 + rng.uniform()};
    const int m = 2 + trial % 5;
    for (int j = 0; j < m; ++j) f.means.push_back(2.0 * rng.normal());
    const double v = multi_tv_gaussian(f);
    EXPECT_NEAR(v, grid_multi_tv(f), 1e-8);
    EXPECT_LE(v, multi_tv_upper_bound(f) + 1e-12);
  }
}

TEST(BuildMatching, TightTwoPointSplitsAtMidpoint) {
  const double eps = 0.2;
  const double a = half_gap_for_tv(eps / (1.0 - eps));
  const GaussianFamily f{{-a, a}, 1.0};
  const MatchingBundle b = build_matching(f, eps);
  expect_bundle_valid(f, eps, b);
  const auto& q = b.q[0];
  const double peak = *std::max_element(q.values().begin(), q.values().end());
  for (std::size_t k = 0; k < q.grid().size(); ++k) {
    if (q.grid().nodes()[k] < 0.0) EXPECT_LE(q.values()[k], 1e-12 * peak);
  }
}

TEST(BuildMatching, ThreeEquallySpacedTightMeans) {
  const double eps = 0.3;
  // Scale the spacing so the multi-TV sits just below eps / (1 - eps).
  double lo = 0.0, hi = 5.0;
  for (int k = 0; k < 100; ++k) {
    const double mid = 0.5 * (lo + hi);
    (multi_tv_gaussian({{-mid, 0.0, mid}, 1.0}) < eps / (1.0 - eps) ? lo : hi) = mid;
  }
  const GaussianFamily f{{-lo, 0.0, lo}, 1.0};
  expect_bundle_valid(f, eps, build_matching(f, eps));
}

TEST(BuildMatching, SlackUsesBlend) {
  const GaussianFamily f{{-0.1, 0.05, 0.2}, 1.0};
  const double eps = 0.25;
  const MatchingBundle b = build_matching(f, eps);
  expect_bundle_valid(f, eps, b);
  const double tv = multi_tv_gaussian(f);
  EXPECT_NEAR(b.blend / (1.0 - b.blend), tv, 1e-12);
  EXPECT_LT(b.blend, eps);
}

TEST(BuildMatching, RefusesLargeTv) {
  EXPECT_THROW(build_matching({{-3.0, 3.0}, 1.0}, 0.05), InfeasibleError);
  EXPECT_THROW(validate(GaussianFamily{{1.0}, 1.0}), PreconditionError);
}

TEST(KlBundle, MatchedMembersHaveZeroKl) {
  const double eps = 0.2;
  const double r = kSqrtHalfPi * eps;
  const KlBundle b = corollary1_bundle({{-0.9 * r, 0.2 * r, 0.95 * r}, 1.0}, eps);
  EXPECT_EQ(b.matched.size(), 3u);
  EXPECT_LE(b.kl_matrix.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(KlBundle, NoMatchedMembersStillBounded) {
  const KlBundle b = corollary1_bundle({{2.0, -2.5, 3.0}, 1.0}, 0.1);
  EXPECT_TRUE(b.matched.empty());
  EXPECT_LE((b.kl_matrix - b.kl_bound).maxCoeff(), 1e-6);
  EXPECT_GT(b.kl_matrix.maxCoeff(), 0.0);
}

TEST(KlBundle, MixedCaseBounded) {
  const KlBundle b = corollary1_bundle({{0.05, 1.2}, 1.0}, 0.15);
  EXPECT_EQ(b.matched.size(), 1u);
  EXPECT_LE((b.kl_matrix - b.kl_bound).maxCoeff(), 1e-6);
  for (const TabulatedDensity& q : b.q) EXPECT_TRUE(q.mass_ok(1e-6));
}

TEST(Fano, GoldenValue) {
  EXPECT_NEAR(fano_delta(1e4, 1, 1.0, 0.1), golden::kFanoDelta_1e4_1_1_01, 1e-12);
}

TEST(Fano, CleanScalingIsSqrtPOverN) {
  const double base = fano_delta(1e3, 2, 1.0, 0.0) / std::sqrt(2.0 / 1e3);
  for (double n : {1e4, 1e5}) {
    EXPECT_NEAR(fano_delta(n, 2, 1.0, 0.0) / std::sqrt(2.0 / n) / base, 1.0, 0.05);
  }
  EXPECT_NEAR(fano_delta(1e4, 1, 3.0, 0.0) / fano_delta(1e4, 1, 1.0, 0.0), 3.0, 1e-12);
}

TEST(Fano, NonDecreasingInEpsilon) {
  double prev = 0.0;
  for (double eps = 0.0; eps < 0.5; eps += 0.02) {
    const double d = fano_delta(1e4, 3, 1.0, eps);
    EXPECT_GE(d, prev);
    prev = d;
  }
}

TEST(Fano, BudgetHoldsAtChosenDelta) {
  RngStream rng(401, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const double n = std::pow(10.0, 3.0 + 3.0 * rng.uniform());
    const int p = 1 + static_cast<int>(rng.uniform() * 10);
    const double eps = 0.45 * rng.uniform();
    const double delta = fano_delta(n, p, 1.0, eps);
    EXPECT_LE(n * kl_bound_expectation(delta, 1.0, eps), 0.25 * p * std::log(2.0) * (1.0 + 1e-9))
        << "n " << n << " p " << p << " eps " << eps;
  }
}

TEST(Fano, KlExpectationMatchesQuadrature) {
  const Grid1D g = Grid1D::uniform(-12.0, 12.0, 24001);
  for (double delta : {0.01, 0.2, 1.0}) {
    for (double eps : {0.0, 0.1, 0.3}) {
      std::vector<double> v(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double z = g.nodes()[k];
        const double u = std::max(2.0 * delta * std::abs(z) - kSqrtHalfPi * eps, 0.0);
        v[k] = 4.0 * u * u * normal_pdf(z);
      }
      EXPECT_NEAR(kl_bound_expectation(delta, 1.0, eps), integrate_grid(v, g), 1e-7);
    }
  }
}

TEST(SpherePacking, PairwiseDistancesExceedHalf) {
  RngStream rng(402, 0);
  const auto pts = sphere_packing(4, 12, rng);
  ASSERT_EQ(pts.size(), 12u);
  for (std::size_t a = 0; a < pts.size(); ++a) {
    EXPECT_NEAR(pts[a].norm(), 1.0, 1e-12);
    for (std::size_t b = a + 1; b < pts.size(); ++b) EXPECT_GT((pts[a] - pts[b]).norm(), 0.5);
  }
}

}  // namespace
}  // namespace robreg

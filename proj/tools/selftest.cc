#include "selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "goldens.hpp"
#include "robreg/contamination.hpp"
#include "robreg/designs.hpp"
#include "robreg/errors.hpp"
#include "robreg/estimators.hpp"
#include "robreg/matching.hpp"
#include "robreg/numerics.hpp"
#include "robreg/sq_hardness.hpp"

namespace robreg::tools {
namespace {

using Check = std::function<std::string()>;  // empty string on success

std::string expect(bool ok, const std::string& detail) { return ok ? "" : detail; }

std::string close(double got, double want, double tol) {
  return expect(std::abs(got - want) <= tol,
                fmt::format("got {:.12g}, want {:.12g} (tol {:.1e})", got, want, tol));
}

template <class E>
std::string throws(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const E&) {
    return "";
  } catch (const std::exception& e) {
    return std::string("wrong exception: ") + e.what();
  }
  return "no exception";
}

Grid1D grid10() { return Grid1D::uniform(-10.0, 10.0, 4001); }

std::vector<double> on_grid(const Grid1D& g, const std::function<double(double)>& f) {
  std::vector<double> v(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) v[k] = f(g.nodes()[k]);
  return v;
}

ModelSpec model_1d(double eps, AdversarySpec adv, int p = 1) {
  ModelSpec m;
  m.beta = Eigen::VectorXd::Zero(p);
  m.beta(0) = 1.0;
  m.sigma = 1.0;
  m.epsilon = eps;
  m.design = DesignSpec::gaussian(p);
  m.adversary = std::move(adv);
  return m;
}

std::vector<std::pair<std::string, Check>> checks() {
  std::vector<std::pair<std::string, Check>> c;

  c.emplace_back("weighted_median odd count", [] {
    const double v[] = {1, 2, 3}, w[] = {1, 1, 1};
    return close(weighted_median(v, w), 2.0, 0.0);
  });
  c.emplace_back("weighted_median singleton", [] {
    const double v[] = {5}, w[] = {0.1};
    return close(weighted_median(v, w), 5.0, 0.0);
  });
  c.emplace_back("weighted_median heavy tail weight", [] {
    const double v[] = {1, 2, 3, 4}, w[] = {1, 1, 1, 10};
    return close(weighted_median(v, w), 4.0, 0.0);
  });
  c.emplace_back("generalized gaussian gamma=1 moments", [] {
    RngStream rng(11, 0);
    const int n = 100000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = sample_gen_gaussian_1d(1.0, rng);
      s1 += x;
      s2 += x * x;
    }
    const double var = s2 / n;
    // Laplace(scale 2): sd of x is sqrt(8), var of x^2 is 24 * 2^4 - 8^2.
    std::string e = close(s1 / n, 0.0, 5.0 * std::sqrt(8.0 / n));
    if (e.empty()) e = close(var, 8.0, 5.0 * std::sqrt(320.0 / n));
    return e;
  });
  c.emplace_back("cheb single constraint", [] {
    const Grid1D g = grid10();
    Eigen::MatrixXd A(1, g.size());
    for (std::size_t k = 0; k < g.size(); ++k) A(0, k) = g.weights()[k] * normal_pdf(g.nodes()[k]);
    const Eigen::VectorXd b = Eigen::VectorXd::Constant(1, A.sum());
    const ChebSolution s = cheb_min_inf_solve(A, b);
    return close(s.norm, 1.0, 1e-9);
  });
  c.emplace_back("cheb sign solution", [] {
    const Grid1D g = grid10();
    Eigen::MatrixXd A(2, g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double w = g.weights()[k] * normal_pdf(g.nodes()[k]);
      A(0, k) = w;
      A(1, k) = w * g.nodes()[k];
    }
    Eigen::VectorXd b(2);
    b << 0.0, 1.0;
    return close(cheb_min_inf_solve(A, b).norm, kSqrtHalfPi, 1e-5);
  });
  c.emplace_back("cheb random feasibility", [] {
    RngStream rng(12, 0);
    Eigen::MatrixXd A(3, 40);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = rng.normal();
    Eigen::VectorXd b(3);
    for (int i = 0; i < 3; ++i) b(i) = rng.normal();
    const ChebSolution s = cheb_min_inf_solve(A, b);
    return expect(s.residual <= 1e-10, fmt::format("residual {:.3e}", s.residual));
  });
  c.emplace_back("quadrature moments", [] {
    const Grid1D g = grid10();
    std::string e = close(integrate_grid(on_grid(g, [](double x) { return normal_pdf(x); }), g),
                          1.0, 1e-8);
    if (e.empty()) {
      e = close(integrate_grid(on_grid(g, [](double x) { return x * normal_pdf(x); }), g), 0.0,
                1e-12);
    }
    if (e.empty()) {
      e = close(integrate_grid(on_grid(g, [](double x) { return x * x * normal_pdf(x); }), g),
                1.0, 1e-8);
    }
    return e;
  });
  c.emplace_back("normal cdf", [] {
    std::string e = close(normal_cdf(0.0), 0.5, 0.0);
    if (e.empty()) e = close(normal_cdf(1.3) + normal_cdf(-1.3), 1.0, 1e-15);
    if (e.empty()) e = close(normal_cdf(1.96), 0.975002, 1e-6);
    return e;
  });

  c.emplace_back("gaussian design moments", [] {
    RngStream rng(13, 0);
    const int n = 100000;
    const Eigen::MatrixXd X = sample_design(DesignSpec::gaussian(3), n, rng);
    const Eigen::VectorXd mean = X.colwise().mean();
    const Eigen::MatrixXd cov = (X.transpose() * X) / n;
    const double cov_err = (cov - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff();
    return expect(mean.cwiseAbs().maxCoeff() <= 4.0 / std::sqrt(n) && cov_err <= 0.02,
                  fmt::format("mean {:.3e} cov {:.3e}", mean.cwiseAbs().maxCoeff(), cov_err));
  });
  c.emplace_back("laplace design kurtosis", [] {
    RngStream rng(14, 0);
    const int n = 100000;
    const Eigen::MatrixXd X = sample_design(DesignSpec::generalized(1.0), n, rng);
    const double m2 = X.array().square().mean();
    const double m4 = X.array().square().square().mean();
    return close(m4 / (m2 * m2), 6.0, 5.0 * std::sqrt(2484.0 / n));
  });

  c.emplace_back("clean model has no outliers", [] {
    RngStream rng(15, 0);
    const ContaminatedSample s = generate(model_1d(0.0, adversary::FlipSign{}), 2000, rng);
    for (bool b : s.inlier_mask) {
      if (!b) return std::string("flagged row at eps = 0");
    }
    const Eigen::VectorXd r = s.y - s.X * Eigen::VectorXd::Ones(1);
    return close(r.squaredNorm() / r.size(), 1.0, 5.0 * std::sqrt(2.0 / r.size()));
  });
  c.emplace_back("point mass outliers", [] {
    RngStream rng(16, 0);
    const ContaminatedSample s = generate(model_1d(0.49, adversary::PointMass{0.0}), 2000, rng);
    for (int i = 0; i < s.n(); ++i) {
      if (!s.inlier_mask[i] && s.y(i) != 0.0) return std::string("flagged row with y != 0");
    }
    return std::string();
  });
  c.emplace_back("inlier count", [] {
    RngStream rng(17, 0);
    const int n = 100000;
    const ContaminatedSample s = generate(model_1d(0.3, adversary::FlipSign{}), n, rng);
    double inliers = 0.0;
    for (bool b : s.inlier_mask) inliers += b ? 1.0 : 0.0;
    return close(inliers, 0.7 * n, 4.0 * std::sqrt(n * 0.21));
  });
  c.emplace_back("flip adversary moment", [] {
    RngStream rng(18, 0);
    const int n = 200000;
    const Eigen::VectorXd m = flip_adversary_moment_check(model_1d(0.2, adversary::FlipSign{}), n, rng);
    // sd of x*y is at most sqrt(E x^2 y^2) = sqrt(4).
    return close(m(0), 0.6, 5.0 * 2.0 / std::sqrt(n));
  });
  c.emplace_back("nonuniform mixture identity", [] {
    Eigen::VectorXd beta(2);
    beta << 0.4, -0.2;
    const NonuniformLb lb = build_nonuniform_lb(beta, 1.0);
    const double x[] = {0.7, 1.9};
    const double orth[] = {1.0, 2.0};
    std::string e = close(lb.eps_x(orth), 0.0, 0.0);
    if (e.empty()) {
      const double r = lb.at(x).mixture_residual;
      e = expect(r <= 1e-8, fmt::format("residual {:.3e}", r));
    }
    return e;
  });

  c.emplace_back("truncated lad exact line", [] {
    const double x[] = {-2.0, -0.5, 0.3, 1.0, 3.0};
    double y[5];
    for (int i = 0; i < 5; ++i) y[i] = 2.0 * x[i];
    return close(truncated_lad_1d(x, y, 0.8).beta_hat(0), 2.0, 0.0);
  });
  c.emplace_back("truncated lad grid oracle", [] {
    RngStream rng(19, 0);
    std::vector<double> x(20), y(20);
    for (int i = 0; i < 20; ++i) {
      x[i] = rng.normal();
      y[i] = 0.7 * x[i] + rng.normal();
    }
    const double t = 0.4;
    auto obj = [&](double b) {
      double s = 0.0;
      for (int i = 0; i < 20; ++i) {
        if (std::abs(x[i]) >= t) s += std::abs(y[i] - b * x[i]);
      }
      return s;
    };
    double best = 0.0, best_val = obj(-10.0);
    for (int k = 0; k <= 200000; ++k) {
      const double b = -10.0 + 1e-4 * k;
      if (obj(b) < best_val) {
        best_val = obj(b);
        best = b;
      }
    }
    return close(truncated_lad_1d(x, y, t).beta_hat(0), best, 1e-4);
  });
  c.emplace_back("lad agrees with weighted median", [] {
    RngStream rng(20, 0);
    Eigen::MatrixXd X(60, 1);
    Eigen::VectorXd y(60);
    for (int i = 0; i < 60; ++i) {
      X(i, 0) = rng.normal();
      y(i) = -0.3 * X(i, 0) + rng.normal();
    }
    const double exact =
        truncated_lad_1d({X.data(), 60}, {y.data(), 60}, 0.0).beta_hat(0);
    return close(lad_fit(X, y).beta_hat(0), exact, 1e-6);
  });
  c.emplace_back("lad exact linear data", [] {
    RngStream rng(21, 0);
    Eigen::MatrixXd X(40, 3);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    Eigen::VectorXd beta(3);
    beta << 1.0, -2.0, 0.5;
    const Eigen::VectorXd y = X * beta;
    const double err = (lad_fit(X, y).beta_hat - beta).cwiseAbs().maxCoeff();
    return expect(err <= 1e-8, fmt::format("error {:.3e}", err));
  });
  c.emplace_back("depth single point", [] {
    Eigen::MatrixXd X(1, 1);
    X << 1.0;
    Eigen::VectorXd y(1), b(1);
    y << 2.0;
    b << 1.0;
    Eigen::MatrixXd dirs(1, 2);
    dirs << 1.0, -1.0;
    return close(depth_eval(b, X, y, 0.0, dirs), 0.0, 0.0);
  });
  c.emplace_back("depth 1-d grid oracle", [] {
    RngStream rng(22, 0);
    Eigen::MatrixXd X(30, 1);
    Eigen::VectorXd y(30);
    for (int i = 0; i < 30; ++i) {
      X(i, 0) = rng.normal();
      y(i) = 0.5 * X(i, 0) + rng.normal();
    }
    Eigen::MatrixXd dirs(1, 2);
    dirs << 1.0, -1.0;
    const double t = 0.3;
    // Depth is piecewise constant with isolated values at the ratios y/x.
    std::vector<double> bs;
    for (int k = 0; k <= 200000; ++k) bs.push_back(-10.0 + 1e-4 * k);
    for (int i = 0; i < 30; ++i) bs.push_back(y(i) / X(i, 0));
    std::vector<double> depth(bs.size());
    for (std::size_t k = 0; k < bs.size(); ++k) {
      depth[k] = depth_eval(Eigen::VectorXd::Constant(1, bs[k]), X, y, t, dirs);
    }
    const double best = *std::max_element(depth.begin(), depth.end());
    RngStream fit_rng(22, 1);
    const double b_hat = depth_max(X, y, t, DepthOptions{}, fit_rng).beta_hat(0);
    double dist = 1e300;
    for (std::size_t k = 0; k < bs.size(); ++k) {
      if (depth[k] == best) dist = std::min(dist, std::abs(bs[k] - b_hat));
    }
    std::string e = close(depth_eval(Eigen::VectorXd::Constant(1, b_hat), X, y, t, dirs), best, 0.0);
    if (e.empty()) e = expect(dist <= 1e-4, fmt::format("distance to maximizers {:.3e}", dist));
    return e;
  });
  c.emplace_back("depth scale equivariance", [] {
    RngStream rng(23, 0);
    Eigen::MatrixXd X(25, 1);
    Eigen::VectorXd y(25);
    for (int i = 0; i < 25; ++i) {
      X(i, 0) = rng.normal();
      y(i) = X(i, 0) + rng.normal();
    }
    RngStream a(23, 1), b(23, 1);
    const double base = depth_max(X, y, 0.2, DepthOptions{}, a).beta_hat(0);
    const double scaled = depth_max(X, 3.0 * y, 0.2, DepthOptions{}, b).beta_hat(0);
    return close(scaled, 3.0 * base, 1e-12 * std::abs(3.0 * base));
  });

  c.emplace_back("multi-TV of identical members", [] {
    return close(multi_tv_gaussian({{0.3, 0.3, 0.3}, 1.0}), 0.0, 1e-15);
  });
  c.emplace_back("multi-TV two-point closed form", [] {
    return close(multi_tv_gaussian({{0.0, 1.0}, 1.0}), 0.38292492254802624, 1e-10);
  });
  c.emplace_back("matching at the threshold", [] {
    const double eps = 0.2;
    // 2 Phi(a) - 1 = eps / (1 - eps).
    double lo = 0.0, hi = 5.0;
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (lo + hi);
      (2.0 * normal_cdf(mid) - 1.0 < eps / (1.0 - eps) ? lo : hi) = mid;
    }
    const MatchingBundle b = build_matching({{-lo, lo}, 1.0}, eps);
    double left_mass = 0.0;
    const auto& q = b.q[0];
    const double peak = *std::max_element(q.values().begin(), q.values().end());
    for (std::size_t k = 0; k < q.grid().size(); ++k) {
      if (q.grid().nodes()[k] < 0.0) left_mass = std::max(left_mass, q.values()[k] / peak);
    }
    // The left part is (eps - blend) / eps times a density, zero up to rounding.
    return expect(b.mixture_residual <= 1e-8 && left_mass <= 1e-12,
                  fmt::format("residual {:.3e}, q_1 on x<0 {:.3e}", b.mixture_residual, left_mass));
  });
  c.emplace_back("matching refuses large TV", [] {
    return throws<InfeasibleError>([] { build_matching({{-3.0, 3.0}, 1.0}, 0.05); });
  });
  c.emplace_back("KL bound with no matched members", [] {
    const KlBundle b = corollary1_bundle({{2.0, -2.5, 3.0}, 1.0}, 0.1);
    const double gap = (b.kl_matrix - b.kl_bound).maxCoeff();
    return expect(b.matched.empty() && gap <= 1e-6, fmt::format("gap {:.3e}", gap));
  });
  c.emplace_back("fano golden value", [] {
    return close(fano_delta(1e4, 1, 1.0, 0.1), golden::kFanoDelta_1e4_1_1_01, 1e-12);
  });
  c.emplace_back("fano clean scaling", [] {
    const double r1 = fano_delta(1e3, 1, 1.0, 0.0) / std::sqrt(1.0 / 1e3);
    const double r2 = fano_delta(1e5, 1, 1.0, 0.0) / std::sqrt(1.0 / 1e5);
    return expect(std::abs(r2 / r1 - 1.0) <= 0.05, fmt::format("ratio {:.4f}", r2 / r1));
  });

  c.emplace_back("hermite values", [] {
    std::string e = close(hermite_eval(0, 3.7), 1.0, 0.0);
    if (e.empty()) e = close(hermite_eval(2, 0.0), -1.0 / std::sqrt(2.0), 1e-15);
    return e;
  });
  c.emplace_back("hermite shift identity", [] {
    const double r1 = hermite_shift_identity_check(1, 0.5, 2.0);
    const double r3 = hermite_shift_identity_check(3, 0.5, 2.0);
    return expect(r1 <= 1e-10 && r3 <= 1e-8, fmt::format("{:.3e} {:.3e}", r1, r3));
  });
  c.emplace_back("sign function bound for m=1", [] {
    const GTables g = build_g(1, Grid1D::hardness_default(1));
    return close(g.achieved_B[0], golden::kAchievedB_m1, golden::kLpRelTol * kSqrtHalfPi);
  });
  c.emplace_back("hard instance m=4", [] {
    const HardInstance inst = HardInstance::build(4, 0.2, 0.02);
    const HardVerification v = inst.verify();
    std::string e = close(inst.kappa(), golden::kKappa_4_02_002,
                          golden::kLpRelTol * golden::kKappa_4_02_002);
    if (e.empty()) {
      e = expect(v.g_moment_residual <= 1e-8 && v.moment_residual <= 1e-6 &&
                     v.marginal_residual <= 1e-6 && std::abs(v.mass_D - 1.0) <= 1e-6 &&
                     std::abs(v.mass_R - 1.0) <= 1e-6,
                 "verification residual above tolerance");
    }
    if (e.empty()) {
      const double chi2 = inst.chi2_avg();
      e = expect(chi2 >= 0.0 && chi2 <= 40.0, fmt::format("chi2 {:.3e}", chi2));
    }
    if (e.empty()) {
      std::stringstream ss;
      inst.export_text(ss);
      const HardInstance back = HardInstance::import_text(ss);
      e = expect(back.kappa() == inst.kappa() &&
                     back.verify().moment_residual == v.moment_residual,
                 "export/import changed the instance");
    }
    return e;
  });
  c.emplace_back("hard instance refuses delta = eps", [] {
    return throws<InfeasibleError>([] { HardInstance::build(4, 0.2, 0.2); });
  });

  c.emplace_back("experiment determinism", [] {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::kRate1d;
    cfg.n_grid = {200, 400};
    cfg.eps_grid = {0.1};
    cfg.estimators = {"trunc", "lad"};
    cfg.reps = 4;
    cfg.base_seed = 99;
    const std::string a = format_csv(run_experiment(cfg, 1));
    const std::string b = format_csv(run_experiment(cfg, 3));
    return expect(a == b, "thread count changed the CSV");
  });
  c.emplace_back("csv roundtrip", [] {
    ResultRow r;
    r.kind = "rate_1d";
    r.n = 1000;
    r.p = 1;
    r.eps = 0.1;
    r.estimator = "trunc";
    r.t_used = 1.25;
    r.rep_count = 3;
    r.mean_err = 0.5;
    r.median_err = 0.25;
    r.se = 0.125;
    std::stringstream ss(format_csv({r}));
    const std::vector<ResultRow> back = parse_csv(ss);
    return expect(back.size() == 1 && back[0] == r, "roundtrip mismatch");
  });
  return c;
}

}  // namespace

std::vector<CheckResult> run_selftest() {
  std::vector<CheckResult> out;
  for (auto& [name, fn] : checks()) {
    CheckResult r{name, false, ""};
    try {
      r.detail = fn();
      r.passed = r.detail.empty();
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace robreg::tools

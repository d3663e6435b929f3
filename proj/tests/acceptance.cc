// End-to-end acceptance checks; prints one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "robreg/errors.hpp"
#include "robreg/estimators.hpp"
#include "robreg/harness.hpp"
#include "robreg/matching.hpp"
#include "robreg/numerics.hpp"
#include "robreg/sq_hardness.hpp"

namespace {

using namespace robreg;

struct Outcome {
  bool passed = false;
  std::string detail;
};

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::vector<ResultRow> select(const std::vector<ResultRow>& rows, const std::string& est) {
  std::vector<ResultRow> out;
  for (const auto& r : rows) {
    if (r.estimator == est) out.push_back(r);
  }
  return out;
}

double loglog_slope(const std::vector<ResultRow>& rows) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    const double x = std::log(static_cast<double>(r.n));
    const double y = std::log(r.median_err);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

std::string medians(const std::vector<ResultRow>& rows) {
  std::string s;
  for (const auto& r : rows) s += fmt::format("{}{:.4g}", s.empty() ? "" : " ", r.median_err);
  return s;
}

Outcome consistency(int threads) {
  const auto rows = run_experiment(
      parse("kind=rate_1d\nn_grid=1000,10000,100000,1000000\np=1\neps=0.1\nsigma=1\n"
            "adversary=flip_sign\nestimators=trunc,lad\nt_policy=thm1\nreps=200\nseed=1\n"),
      threads);
  const auto trunc = select(rows, "trunc");
  const auto lad = select(rows, "lad");
  bool ok = trunc.size() == 4 && lad.size() == 4;
  for (std::size_t i = 1; ok && i < trunc.size(); ++i) {
    ok = trunc[i].median_err < trunc[i - 1].median_err;
  }
  const double ratio = trunc.back().median_err / trunc.front().median_err;
  const double lad_change = std::max(lad[1].median_err, lad[3].median_err) /
                            std::min(lad[1].median_err, lad[3].median_err);
  ok = ok && ratio <= 0.7 && lad_change < 1.5;
  return {ok, fmt::format("trunc medians {} (ratio {:.3f}); lad medians {} (change {:.3f})",
                          medians(trunc), ratio, medians(lad), lad_change)};
}

Outcome clean_rate(int threads) {
  const auto one = run_experiment(
      parse("kind=lad_rate\nn_grid=1000,10000,100000\np=1\neps=0\nestimators=lad,depth\n"
            "t_policy=thm2\nreps=200\nseed=2\n"),
      threads);
  const auto three = run_experiment(
      parse("kind=lad_rate\nn_grid=1000,10000,100000\np=3\neps=0\nestimators=lad\n"
            "reps=200\nseed=3\n"),
      threads);
  std::string detail;
  bool ok = true;
  for (const auto& [label, rows] :
       {std::pair{std::string("p=1 lad"), select(one, "lad")},
        std::pair{std::string("p=1 depth"), select(one, "depth")},
        std::pair{std::string("p=3 lad"), select(three, "lad")}}) {
    const double slope = rows.size() == 3 ? loglog_slope(rows) : NAN;
    ok = ok && slope >= -0.6 && slope <= -0.4;
    detail += fmt::format("{}{} slope {:.3f}", detail.empty() ? "" : "; ", label, slope);
  }
  return {ok, detail};
}

Outcome gamma_effect(int threads) {
  const auto rows = run_experiment(
      parse("kind=gamma_effect\nn_grid=1000000\np=1\neps=0.1\nadversary=flip_sign\n"
            "estimators=trunc\nt_policy=thm5\ngamma_grid=1,2\nreps=100\nseed=4\n"),
      threads);
  const auto g1 = select(rows, "trunc@gamma=1");
  const auto g2 = select(rows, "trunc@gamma=2");
  if (g1.size() != 1 || g2.size() != 1) return {false, "missing gamma rows"};
  const double margin = std::hypot(g1[0].se, g2[0].se);
  const double gap = g2[0].median_err - g1[0].median_err;
  return {gap >= margin, fmt::format("median gamma=1 {:.4g}, gamma=2 {:.4g}, gap {:.3g}, "
                                     "combined se {:.3g}",
                                     g1[0].median_err, g2[0].median_err, gap, margin)};
}

Outcome oracle_equivalence() {
  RngStream rng(5, 0);
  Eigen::MatrixXd dirs(1, 2);
  dirs << 1.0, -1.0;
  std::vector<double> grid;
  for (int k = 0; k <= 200000; ++k) grid.push_back(-10.0 + 1e-4 * k);
  double worst_trunc = 0.0, worst_depth = 0.0, worst_lad = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const int n = 30;
    Eigen::MatrixXd X(n, 1);
    Eigen::VectorXd y(n);
    const double slope = rng.normal();
    for (int i = 0; i < n; ++i) {
      X(i, 0) = rng.normal();
      y(i) = slope * X(i, 0) + rng.normal();
    }
    const double t = 0.5 * rng.uniform();
    const std::span<const double> xs(X.data(), n), ys(y.data(), n);

    auto obj = [&](double b) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        if (std::abs(X(i, 0)) >= t) s += std::abs(y(i) - b * X(i, 0));
      }
      return s;
    };
    double best_b = grid.front(), best_obj = obj(grid.front());
    for (double b : grid) {
      const double v = obj(b);
      if (v < best_obj) {
        best_obj = v;
        best_b = b;
      }
    }
    worst_trunc = std::max(worst_trunc, std::abs(truncated_lad_1d(xs, ys, t).beta_hat(0) - best_b));

    // Depth is piecewise constant with isolated values at the ratios y/x.
    std::vector<double> cands = grid;
    for (int i = 0; i < n; ++i) cands.push_back(y(i) / X(i, 0));
    std::vector<double> depth(cands.size());
    for (std::size_t k = 0; k < cands.size(); ++k) {
      depth[k] = depth_eval(Eigen::VectorXd::Constant(1, cands[k]), X, y, t, dirs);
    }
    const double top = *std::max_element(depth.begin(), depth.end());
    RngStream fit_rng(5, 1 + inst);
    const FitReport d = depth_max(X, y, t, DepthOptions{}, fit_rng);
    double dist = INFINITY;
    for (std::size_t k = 0; k < cands.size(); ++k) {
      if (depth[k] == top) dist = std::min(dist, std::abs(cands[k] - d.beta_hat(0)));
    }
    if (depth_eval(d.beta_hat, X, y, t, dirs) != top) dist = INFINITY;
    worst_depth = std::max(worst_depth, dist);

    const double wm = truncated_lad_1d(xs, ys, 0.0).beta_hat(0);
    worst_lad = std::max(worst_lad, std::abs(lad_fit(X, y).beta_hat(0) - wm));
  }
  const bool ok = worst_trunc <= 1e-4 && worst_depth <= 1e-4 && worst_lad <= 1e-6;
  return {ok, fmt::format("max |trunc - grid| {:.2e}, max depth distance {:.2e}, "
                          "max |lad - weighted median| {:.2e}",
                          worst_trunc, worst_depth, worst_lad)};
}

Outcome equivariance() {
  RngStream rng(6, 0);
  double exact = 0.0, irls = 0.0;
  auto rel = [](double got, double want, double scale) {
    return std::abs(got - want) / std::max(scale, 1e-300);
  };
  for (int inst = 0; inst < 100; ++inst) {
    const int p = 1 + inst % 3;
    const int n = 40 + inst % 7;
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n), b(p);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    for (int j = 0; j < p; ++j) b(j) = rng.normal();
    for (int i = 0; i < n; ++i) y(i) = X.row(i).dot(b) + rng.normal();
    Eigen::VectorXd shift(p);
    for (int j = 0; j < p; ++j) shift(j) = rng.normal();
    const double c = 0.1 + 5.0 * rng.uniform();
    const Eigen::VectorXd y_shift = y + X * shift;
    const Eigen::VectorXd y_scale = c * y;

    const Eigen::VectorXd lf = lad_fit(X, y).beta_hat;
    const double lscale = std::max(1.0, lf.norm());
    irls = std::max(irls, (lad_fit(X, y_shift).beta_hat - lf - shift).norm() /
                              std::max(1.0, (lf + shift).norm()));
    irls = std::max(irls, (lad_fit(X, y_scale).beta_hat - c * lf).norm() / (c * lscale));

    if (p == 1) {
      const std::span<const double> xs(X.data(), n);
      const double t = 0.3;
      const double tl = truncated_lad_1d(xs, {y.data(), static_cast<std::size_t>(n)}, t).beta_hat(0);
      const double tl_shift =
          truncated_lad_1d(xs, {y_shift.data(), static_cast<std::size_t>(n)}, t).beta_hat(0);
      const double tl_scale =
          truncated_lad_1d(xs, {y_scale.data(), static_cast<std::size_t>(n)}, t).beta_hat(0);
      exact = std::max(exact, rel(tl_shift, tl + shift(0), std::abs(tl) + std::abs(shift(0))));
      exact = std::max(exact, rel(tl_scale, c * tl, std::abs(c * tl)));

      RngStream a(6, 1000 + inst), s1(6, 1000 + inst), s2(6, 1000 + inst);
      const double dm = depth_max(X, y, t, DepthOptions{}, a).beta_hat(0);
      const double dm_shift = depth_max(X, y_shift, t, DepthOptions{}, s1).beta_hat(0);
      const double dm_scale = depth_max(X, y_scale, t, DepthOptions{}, s2).beta_hat(0);
      exact = std::max(exact, rel(dm_shift, dm + shift(0), std::abs(dm) + std::abs(shift(0))));
      exact = std::max(exact, rel(dm_scale, c * dm, std::abs(c * dm)));
    }
  }
  // Exact paths differ from the identity only by floating-point rounding of y/x.
  const bool ok = exact <= 1e-12 && irls <= 1e-8;
  return {ok, fmt::format("exact paths max relative gap {:.2e}; lad_fit max relative gap {:.2e}",
                          exact, irls)};
}

Outcome matching_constructions() {
  const auto results = matching_certifications(7, 50);
  bool ok = !results.empty();
  std::string failed;
  for (const auto& r : results) {
    if (!r.passed) {
      ok = false;
      failed += fmt::format("{}{} ({})", failed.empty() ? "" : "; ", r.name, r.detail);
    }
  }
  return {ok, ok ? fmt::format("{} certification checks over 50 families", results.size())
                 : failed};
}

Outcome fano_curve() {
  bool ok = true;
  std::string detail;
  const double base = fano_delta(1e3, 1, 1.0, 0.0) / std::sqrt(1.0 / 1e3);
  double worst_scaling = 0.0;
  for (double n : {1e4, 1e5}) {
    worst_scaling = std::max(worst_scaling,
                             std::abs(fano_delta(n, 1, 1.0, 0.0) / std::sqrt(1.0 / n) / base - 1.0));
  }
  ok = ok && worst_scaling <= 0.05;
  double prev = 0.0;
  bool monotone = true;
  for (double eps = 0.0; eps < 0.5; eps += 0.01) {
    const double d = fano_delta(1e4, 2, 1.0, eps);
    monotone = monotone && d >= prev;
    prev = d;
  }
  ok = ok && monotone;
  RngStream rng(8, 0);
  double worst_budget = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double n = std::round(std::pow(10.0, 3.0 + 3.0 * rng.uniform()));
    const int p = 1 + static_cast<int>(rng.uniform() * 20);
    const double eps = 0.45 * rng.uniform();
    const double delta = fano_delta(n, p, 1.0, eps);
    const double used = n * kl_bound_expectation(delta, 1.0, eps) / (0.25 * p * std::log(2.0));
    worst_budget = std::max(worst_budget, used);
  }
  ok = ok && worst_budget <= 1.0;
  return {ok, fmt::format("scaling deviation {:.3f}, monotone in eps {}, max budget ratio {:.4f}",
                          worst_scaling, monotone ? "yes" : "no", worst_budget)};
}

Outcome sq_construction() {
  const int m = 4;
  const HardInstance inst = HardInstance::build(m, 0.2, 0.02);
  const HardVerification v = inst.verify();
  bool bounds_ok = true;
  const double r = std::sqrt(32.0 * m);
  for (int i = 1; i <= m; ++i) {
    double sup = 0.0;
    for (int k = 0; k <= 100000; ++k) sup = std::max(sup, std::abs(hermite_eval(i, -r + 2.0 * r * k / 100000)));
    bounds_ok = bounds_ok && inst.achieved_B()[i - 1] <= 2.0 * sup;
  }
  const double chi2 = inst.chi2_avg();
  RngStream rng(9, 0);
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(5);
  dir(0) = 1.0;
  const Eigen::MatrixXd z = hermite_probe(inst.sample_alt(dir, 100000, rng), dir, m);
  const double zmax = z.cwiseAbs().maxCoeff();
  const bool ok = inst.kappa() <= 1.0 && v.g_moment_residual <= 1e-8 && bounds_ok &&
                  v.moment_residual <= 1e-6 && v.marginal_residual <= 1e-6 &&
                  std::isfinite(chi2) && chi2 <= 10.0 * m && zmax <= 4.0;
  return {ok, fmt::format("kappa {:.6g}, g moments {:.2e}, B within target {}, A_y moments {:.2e}, "
                          "marginal {:.2e}, chi2_avg {:.6g}, max |z| {:.3f}",
                          inst.kappa(), v.g_moment_residual, bounds_ok ? "yes" : "no",
                          v.moment_residual, v.marginal_residual, chi2, zmax)};
}

Outcome determinism(int threads) {
  const std::vector<std::string> configs = {
      "kind=rate_1d\nn_grid=500,2000\neps=0,0.1,0.2\nestimators=trunc,lad,ols\nreps=6\nseed=10\n",
      "kind=rate_hd\nn_grid=400\np=2\neps=0.1\nadversary=nonuniform_lb\nestimators=lad,depth\n"
      "reps=3\nseed=11\n",
      "kind=gamma_effect\nn_grid=3000\neps=0.1\nestimators=trunc\nreps=5\nseed=12\n",
      "kind=rate_1d\nn_grid=800\neps=0.1\nadversary=hard_sq\nestimators=trunc\nreps=3\nseed=13\n",
      "kind=l2_trunc_demo\np=20\nn_grid=500\nreps=3\nseed=14\n",
  };
  const int many = std::max(threads, 4);
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const ExperimentConfig c = parse(configs[k]);
    const std::string a = format_csv(run_experiment(c, 1));
    const std::string b = format_csv(run_experiment(c, many));
    const std::string again = format_csv(run_experiment(c, many));
    if (a != b || a != again) return {false, fmt::format("config {} differs across runs", k)};
  }
  return {true, fmt::format("{} configs byte-identical at 1 and {} threads", configs.size(), many)};
}

}  // namespace

int main(int argc, char** argv) {
  int threads = 8;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--threads") threads = std::max(1, std::atoi(argv[i + 1]));
  }
  const std::vector<std::function<Outcome()>> criteria = {
      [&] { return consistency(threads); },
      [&] { return clean_rate(threads); },
      [&] { return gamma_effect(threads); },
      [] { return oracle_equivalence(); },
      [] { return equivariance(); },
      [] { return matching_constructions(); },
      [] { return fano_curve(); },
      [] { return sq_construction(); },
      [&] { return determinism(threads); },
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << fmt::format("criterion {}: {} {} [{:.1f}s]\n", k + 1, o.passed ? "PASS" : "FAIL",
                             o.detail, secs)
              << std::flush;
    if (!o.passed) ++failures;
  }
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}

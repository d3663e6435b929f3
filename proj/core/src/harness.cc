#include "robreg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "robreg/errors.hpp"
#include "robreg/matching.hpp"
#include "robreg/sq_hardness.hpp"

namespace robreg {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RepOutcome {
  bool ok = false;
  double value = 0.0;
  double t_used = 0.0;
  double ms = 0.0;
  std::string message;
};

struct Summary {
  int count = 0;
  double mean = kNaN;
  double median = kNaN;
  double se = kNaN;
};

Summary summarize(std::vector<double> v) {
  Summary s;
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / s.count;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.se = s.count > 1 ? std::sqrt(ss / (s.count - 1) / s.count) : 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  s.median = v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return s;
}

ResultRow make_row(const ExperimentConfig& c, long long n, double eps,
                   const std::string& estimator, const std::vector<RepOutcome>& reps) {
  ResultRow row;
  row.kind = to_string(c.kind);
  row.n = n;
  row.p = c.p;
  row.eps = eps;
  row.estimator = estimator;
  std::vector<double> values;
  std::string first_error;
  double ms = 0.0;
  for (const auto& r : reps) {
    ms += r.ms;
    if (r.ok) {
      values.push_back(r.value);
      row.t_used = r.t_used;
    } else if (first_error.empty()) {
      first_error = r.message;
    }
  }
  const Summary s = summarize(std::move(values));
  row.rep_count = s.count;
  row.mean_err = s.mean;
  row.median_err = s.median;
  row.se = s.se;
  row.wall_ms = ms;
  if (s.count == 0) {
    row.t_used = kNaN;
    row.error = first_error.empty() ? "no successful replications" : first_error;
  }
  return row;
}

Eigen::VectorXd config_beta(const ExperimentConfig& c) {
  if (!c.beta.empty()) return Eigen::Map<const Eigen::VectorXd>(c.beta.data(), c.p);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(c.p);
  beta(0) = 1.0;
  return beta;
}

bool is_rate_kind(ExperimentKind k) {
  return k == ExperimentKind::kRate1d || k == ExperimentKind::kRateHd ||
         k == ExperimentKind::kLadRate || k == ExperimentKind::kGammaEffect;
}

void check_estimator(const std::string& name, int p) {
  if (name == "trunc") {
    if (p != 1) throw UnsupportedError("trunc: the truncated LAD estimator requires p = 1");
  } else if (name == "depth") {
    if (p > DepthOptions{}.max_dim) throw UnsupportedError("depth: dimension above max_dim");
  } else if (name != "lad" && name != "ols") {
    throw UnsupportedError("unknown estimator '" + name + "'");
  }
}

double estimator_t(const std::string& name, const TruncationPolicy& policy, long long n,
                   int p, double eps) {
  if (name == "trunc" || name == "depth") return choose_t(policy, n, p, eps);
  return 0.0;
}

Eigen::VectorXd fit(const std::string& name, const ContaminatedSample& s, double t,
                    RngStream& rng) {
  if (name == "trunc" || (name == "lad" && s.p() == 1)) {
    const std::span<const double> x(s.X.data(), static_cast<std::size_t>(s.n()));
    const std::span<const double> y(s.y.data(), static_cast<std::size_t>(s.n()));
    return truncated_lad_1d(x, y, name == "trunc" ? t : 0.0).beta_hat;
  }
  if (name == "lad") return lad_fit(s.X, s.y).beta_hat;
  if (name == "depth") return depth_max(s.X, s.y, t, DepthOptions{}, rng).beta_hat;
  return ols_fit(s.X, s.y).beta_hat;
}

struct RateCell {
  long long n = 0;
  double eps = 0.0;
  double gamma = 2.0;
  bool generalized = false;
  std::string estimator;
  std::string label;
};

std::vector<ResultRow> run_rates(const ExperimentConfig& c, int threads) {
  std::vector<RateCell> cells;
  const bool gamma_kind = c.kind == ExperimentKind::kGammaEffect;
  const std::vector<double> gammas = gamma_kind ? c.gamma_grid : std::vector<double>{2.0};
  for (long long n : c.n_grid) {
    for (double eps : c.eps_grid) {
      for (double g : gammas) {
        for (const auto& est : c.estimators) {
          RateCell cell{n, eps, g, gamma_kind, est, est};
          if (gamma_kind) cell.label = fmt::format("{}@gamma={:g}", est, g);
          cells.push_back(std::move(cell));
        }
      }
    }
  }

  const bool hard = c.adversary == "hard_sq";
  AdversarySpec base_adversary = hard ? AdversarySpec{} : parse_adversary(c.adversary);
  std::vector<std::shared_ptr<const HardInstance>> instances(c.eps_grid.size());
  std::vector<std::string> instance_errors(c.eps_grid.size());
  if (hard) {
    for (std::size_t k = 0; k < c.eps_grid.size(); ++k) {
      try {
        instances[k] = std::make_shared<const HardInstance>(
            HardInstance::build(c.m, c.eps_grid[k], c.delta));
      } catch (const std::exception& e) {
        instance_errors[k] = e.what();
      }
    }
  }
  const Eigen::VectorXd beta = config_beta(c);

  const std::size_t reps = static_cast<std::size_t>(c.reps);
  std::vector<RepOutcome> outcomes(cells.size() * reps);
  parallel_for(outcomes.size(), threads, [&](std::size_t task) {
    const auto start = std::chrono::steady_clock::now();
    const RateCell& cell = cells[task / reps];
    RepOutcome& out = outcomes[task];
    try {
      check_estimator(cell.estimator, c.p);
      ModelSpec model;
      model.epsilon = cell.eps;
      model.sigma = c.sigma;
      model.beta = beta;
      model.design = cell.generalized ? DesignSpec::generalized(cell.gamma, c.p)
                                      : DesignSpec::gaussian(c.p);
      if (hard) {
        const std::size_t k = static_cast<std::size_t>(
            std::find(c.eps_grid.begin(), c.eps_grid.end(), cell.eps) - c.eps_grid.begin());
        if (!instances[k]) throw InfeasibleError(instance_errors[k]);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(c.p);
        v(0) = 1.0;
        model.beta = c.delta * v;
        model.sigma = std::sqrt(instances[k]->sigma2());
        model.adversary = adversary::HardSq{instances[k], v};
      } else {
        model.adversary = base_adversary;
      }
      TruncationPolicy policy = c.t_policy;
      if (cell.generalized && policy.kind == TruncationPolicy::Kind::kThm5) {
        policy.value = cell.gamma;
      }
      const double t = estimator_t(cell.estimator, policy, cell.n, c.p, cell.eps);
      if (cell.n > std::numeric_limits<int>::max()) {
        throw PreconditionError("n exceeds the supported sample size");
      }
      RngStream rng(c.base_seed, task);
      const ContaminatedSample s = generate(model, static_cast<int>(cell.n), rng);
      const Eigen::VectorXd beta_hat = fit(cell.estimator, s, t, rng);
      out.value = (beta_hat - model.beta).norm();
      out.t_used = t;
      out.ok = std::isfinite(out.value);
      if (!out.ok) out.message = "non-finite estimate";
    } catch (const std::exception& e) {
      out.ok = false;
      out.message = e.what();
    }
    out.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                 .count();
  });

  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::vector<RepOutcome> slice(outcomes.begin() + i * reps,
                                        outcomes.begin() + (i + 1) * reps);
    rows.push_back(make_row(c, cells[i].n, cells[i].eps, cells[i].label, slice));
  }
  return rows;
}

std::vector<double> l2_default_grid(int p) {
  std::vector<double> out;
  const double root = std::sqrt(static_cast<double>(p));
  for (int k = -3; k <= 3; ++k) out.push_back(std::max(root + k, 0.0));
  return out;
}

std::vector<ResultRow> run_l2_demo(const ExperimentConfig& c, int threads) {
  const std::vector<double> ts = c.t_grid.empty() ? l2_default_grid(c.p) : c.t_grid;
  struct Cell {
    long long n;
    double t;
  };
  std::vector<Cell> cells;
  for (long long n : c.n_grid) {
    for (double t : ts) cells.push_back({n, t});
  }
  const std::size_t reps = static_cast<std::size_t>(c.reps);
  std::vector<RepOutcome> outcomes(cells.size() * reps);
  parallel_for(outcomes.size(), threads, [&](std::size_t task) {
    const auto start = std::chrono::steady_clock::now();
    const Cell& cell = cells[task / reps];
    RngStream rng(c.base_seed, task);
    long long hits = 0;
    for (long long i = 0; i < cell.n; ++i) {
      double sq = 0.0;
      for (int j = 0; j < c.p; ++j) {
        const double z = rng.normal();
        sq += z * z;
      }
      if (std::sqrt(sq) >= cell.t) ++hits;
    }
    RepOutcome& out = outcomes[task];
    out.ok = true;
    out.value = static_cast<double>(hits) / static_cast<double>(cell.n);
    out.t_used = cell.t;
    out.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                 .count();
  });
  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::vector<RepOutcome> slice(outcomes.begin() + i * reps,
                                        outcomes.begin() + (i + 1) * reps);
    ResultRow row = make_row(c, cells[i].n, 0.0, "l2_frac", slice);
    row.t_used = cells[i].t;
    rows.push_back(std::move(row));
  }
  return rows;
}

GaussianFamily random_feasible_family(RngStream& rng, double eps) {
  GaussianFamily f;
  const int m = 2 + static_cast<int>(rng.uniform() * 5.0);
  f.sigma = 0.5 + 1.5 * rng.uniform();
  const double spread = 4.0 * f.sigma * rng.uniform_pos();
  for (int j = 0; j < m; ++j) f.means.push_back(spread * (rng.uniform() - 0.5));
  const double threshold = eps / (1.0 - eps);
  while (multi_tv_gaussian(f) > threshold) {
    for (double& mu : f.means) mu *= 0.5;
  }
  return f;
}

GaussianFamily random_family(RngStream& rng, double spread_sd) {
  GaussianFamily f;
  const int m = 2 + static_cast<int>(rng.uniform() * 5.0);
  f.sigma = 0.5 + 1.5 * rng.uniform();
  for (int j = 0; j < m; ++j) f.means.push_back(spread_sd * f.sigma * (2.0 * rng.uniform() - 1.0));
  return f;
}

double kl_excess(const KlBundle& b) {
  return std::max((b.kl_matrix - b.kl_bound).maxCoeff(), 0.0);
}

std::vector<ResultRow> run_matching_check(const ExperimentConfig& c, int threads) {
  static const std::vector<std::string> kMetrics = {"mixture_residual", "mass_error",
                                                    "negativity", "kl_excess"};
  const std::size_t reps = static_cast<std::size_t>(c.reps);
  const std::size_t k_metrics = kMetrics.size();
  std::vector<RepOutcome> outcomes(c.eps_grid.size() * reps * k_metrics);
  parallel_for(c.eps_grid.size() * reps, threads, [&](std::size_t task) {
    const auto start = std::chrono::steady_clock::now();
    const double eps = c.eps_grid[task / reps];
    const std::size_t cell = task / reps;
    const std::size_t rep = task % reps;
    auto slot = [&](std::size_t metric) -> RepOutcome& {
      return outcomes[(cell * k_metrics + metric) * reps + rep];
    };
    try {
      RngStream rng(c.base_seed, task);
      const GaussianFamily f = random_feasible_family(rng, eps);
      const MatchingBundle b = build_matching(f, eps);
      const KlBundle kl = corollary1_bundle(f, eps);
      const double values[] = {b.mixture_residual, b.max_mass_error,
                               std::max(-b.min_q, 0.0), kl_excess(kl)};
      for (std::size_t k = 0; k < k_metrics; ++k) {
        slot(k).ok = true;
        slot(k).value = values[k];
      }
    } catch (const std::exception& e) {
      for (std::size_t k = 0; k < k_metrics; ++k) slot(k).message = e.what();
    }
    slot(0).ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                           start)
                     .count();
  });
  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < c.eps_grid.size(); ++i) {
    for (std::size_t k = 0; k < k_metrics; ++k) {
      const auto first = outcomes.begin() + (i * k_metrics + k) * reps;
      const std::vector<RepOutcome> slice(first, first + reps);
      rows.push_back(make_row(c, static_cast<long long>(kMatchingGridNodes), c.eps_grid[i],
                              kMetrics[k], slice));
    }
  }
  return rows;
}

std::vector<ResultRow> run_hardness_check(const ExperimentConfig& c, int threads) {
  static const std::vector<std::string> kMetrics = {
      "kappa", "moment_residual", "marginal_residual", "chi2_avg", "probe_max_abs_z"};
  const std::size_t k_metrics = kMetrics.size();
  const long long n = c.n_grid.front();
  std::vector<RepOutcome> outcomes(c.eps_grid.size() * k_metrics);
  parallel_for(c.eps_grid.size(), threads, [&](std::size_t cell) {
    const auto start = std::chrono::steady_clock::now();
    try {
      const HardInstance inst = HardInstance::build(c.m, c.eps_grid[cell], c.delta);
      const HardVerification ver = inst.verify();
      Eigen::VectorXd v = Eigen::VectorXd::Zero(c.p);
      v(0) = 1.0;
      RngStream rng(c.base_seed, cell);
      const ContaminatedSample s = inst.sample_alt(v, static_cast<int>(n), rng);
      const double probe =
          c.m > 0 ? hermite_probe(s, v, c.m).cwiseAbs().maxCoeff() : 0.0;
      const double values[] = {inst.kappa(), ver.moment_residual, ver.marginal_residual,
                               inst.chi2_avg(), probe};
      for (std::size_t k = 0; k < k_metrics; ++k) {
        outcomes[cell * k_metrics + k].ok = true;
        outcomes[cell * k_metrics + k].value = values[k];
      }
    } catch (const std::exception& e) {
      for (std::size_t k = 0; k < k_metrics; ++k) outcomes[cell * k_metrics + k].message = e.what();
    }
    outcomes[cell * k_metrics].ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
  });
  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < c.eps_grid.size(); ++i) {
    for (std::size_t k = 0; k < k_metrics; ++k) {
      ResultRow row = make_row(c, n, c.eps_grid[i], kMetrics[k], {outcomes[i * k_metrics + k]});
      if (row.error.empty()) row.t_used = c.delta;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<ResultRow> run_fano_curve(const ExperimentConfig& c) {
  std::vector<ResultRow> rows;
  const double budget = 0.25 * c.p * std::log(2.0);
  for (long long n : c.n_grid) {
    for (double eps : c.eps_grid) {
      RepOutcome delta_out;
      RepOutcome ratio_out;
      try {
        const double delta = fano_delta(static_cast<double>(n), c.p, c.sigma, eps);
        delta_out = {true, delta, delta, 0.0, {}};
        const double kl = kl_bound_expectation(delta, c.sigma, eps);
        ratio_out = {true, static_cast<double>(n) * kl / budget, delta, 0.0, {}};
      } catch (const std::exception& e) {
        delta_out.message = ratio_out.message = e.what();
      }
      rows.push_back(make_row(c, n, eps, "fano_delta", {delta_out}));
      rows.push_back(make_row(c, n, eps, "budget_ratio", {ratio_out}));
    }
  }
  return rows;
}

}  // namespace

void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& config, int threads) {
  validate(config);
  if (is_rate_kind(config.kind)) return run_rates(config, threads);
  switch (config.kind) {
    case ExperimentKind::kL2TruncDemo: return run_l2_demo(config, threads);
    case ExperimentKind::kMatchingCheck: return run_matching_check(config, threads);
    case ExperimentKind::kHardnessCheck: return run_hardness_check(config, threads);
    case ExperimentKind::kFanoCurve: return run_fano_curve(config);
    default: break;
  }
  throw UnsupportedError("run_experiment: unsupported kind");
}

std::vector<CheckResult> matching_certifications(std::uint64_t seed, int families) {
  std::vector<CheckResult> out;
  double worst_neg = 0.0;
  double worst_mass = 0.0;
  double worst_mix = 0.0;
  double worst_partition = 0.0;
  double worst_range = -std::numeric_limits<double>::infinity();
  double worst_kl = -std::numeric_limits<double>::infinity();
  double worst_pair = 0.0;
  for (int k = 0; k < families; ++k) {
    RngStream rng(seed, static_cast<std::uint64_t>(k));
    const double eps = 0.05 + 0.4 * rng.uniform();
    const GaussianFamily f = random_feasible_family(rng, eps);
    const MatchingBundle b = build_matching(f, eps);
    worst_neg = std::max(worst_neg, -b.min_q);
    worst_mass = std::max(worst_mass, b.max_mass_error);
    worst_mix = std::max(worst_mix, b.mixture_residual);
    worst_partition =
        std::max(worst_partition, std::abs(partition_tv(f, b) - multi_tv_gaussian(f)));

    const GaussianFamily wide = random_family(rng, 3.0);
    for (const GaussianFamily* g : {&f, &wide}) {
      worst_range = std::max(worst_range, multi_tv_gaussian(*g) - multi_tv_upper_bound(*g));
    }
    const KlBundle kl = corollary1_bundle(wide, eps);
    worst_kl = std::max(worst_kl, (kl.kl_matrix - kl.kl_bound).maxCoeff());

    const double sigma = 0.5 + 1.5 * rng.uniform();
    const double a = 4.0 * (rng.uniform() - 0.5);
    const double d = 3.0 * sigma * rng.uniform();
    const double closed = 2.0 * normal_cdf(d / (2.0 * sigma)) - 1.0;
    worst_pair = std::max(worst_pair, std::abs(multi_tv_gaussian({{a, a + d}, sigma}) - closed));
  }
  out.push_back({"matching non-negativity", worst_neg <= 0.0,
                 fmt::format("max negative part {:.3e}", worst_neg)});
  out.push_back({"matching unit mass", worst_mass <= 1e-6,
                 fmt::format("max |mass - 1| {:.3e}", worst_mass)});
  out.push_back({"matching mixture equality", worst_mix <= 1e-8,
                 fmt::format("max sup-residual {:.3e}", worst_mix)});
  out.push_back({"matching region partition", worst_partition <= 1e-12,
                 fmt::format("max |partition - multi_tv| {:.3e}", worst_partition)});
  out.push_back({"two-point multi-TV closed form", worst_pair <= 1e-10,
                 fmt::format("max error {:.3e}", worst_pair)});
  out.push_back({"multi-TV range bound", worst_range <= 1e-6,
                 fmt::format("max (tv - bound) {:.3e}", worst_range)});
  out.push_back({"pairwise KL bound", worst_kl <= 1e-6,
                 fmt::format("max (kl - bound) {:.3e}", worst_kl)});
  return out;
}

}  // namespace robreg

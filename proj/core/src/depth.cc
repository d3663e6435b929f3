#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "robreg/errors.hpp"
#include "robreg/estimators.hpp"

namespace robreg {
namespace {

void check_directions(const Eigen::MatrixXd& directions, Eigen::Index p) {
  if (directions.cols() == 0 || directions.rows() != p) {
    throw PreconditionError("depth: directions must be a non-empty p x M matrix");
  }
  for (Eigen::Index k = 0; k < directions.cols(); ++k) {
    if (std::abs(directions.col(k).norm() - 1.0) > 1e-12) {
      throw PreconditionError("depth: direction is not unit norm");
    }
  }
}

double count_depth(const Eigen::VectorXd& proj, const Eigen::VectorXd& r, double t) {
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (std::abs(proj(i)) >= t && proj(i) * r(i) >= 0.0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(r.size());
}

FitReport depth_max_1d(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double t) {
  const Eigen::Index n = X.rows();
  std::vector<double> ratios;
  Eigen::Index zero_hits = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = X(i, 0);
    if (std::abs(x) < t) continue;
    if (x == 0.0) {
      ++zero_hits;
    } else {
      ratios.push_back(y(i) / x);
    }
  }
  if (ratios.empty()) {
    throw NoDataError("depth_max: no observation survives the truncation");
  }
  std::sort(ratios.begin(), ratios.end());

  // For v = +1 an observation counts iff b <= y/x, for v = -1 iff b >= y/x.
  auto depth_count = [&](double b) {
    const auto ge = ratios.end() - std::lower_bound(ratios.begin(), ratios.end(), b);
    const auto le = std::upper_bound(ratios.begin(), ratios.end(), b) - ratios.begin();
    return std::min<std::ptrdiff_t>(ge, le);
  };

  std::vector<double> candidates;
  candidates.reserve(2 * ratios.size());
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    candidates.push_back(ratios[k]);
    if (k + 1 < ratios.size() && ratios[k + 1] > ratios[k]) {
      candidates.push_back(0.5 * (ratios[k] + ratios[k + 1]));
    }
  }
  std::ptrdiff_t best = -1;
  double lo = 0.0;
  double hi = 0.0;
  for (double b : candidates) {
    const std::ptrdiff_t d = depth_count(b);
    if (d > best) {
      best = d;
      lo = hi = b;
    } else if (d == best) {
      hi = b;
    }
  }
  // The depth is quasi-concave in b, so its maximizers form [lo, hi].
  FitReport out;
  out.beta_hat = Eigen::VectorXd::Constant(1, 0.5 * (lo + hi));
  out.objective = static_cast<double>(best + zero_hits) / static_cast<double>(n);
  out.iterations = static_cast<int>(candidates.size());
  return out;
}

class DepthObjective {
 public:
  DepthObjective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double t,
                 const Eigen::MatrixXd& directions)
      : X_(X), y_(y), t_(t), dirs_(directions) {
    constexpr double kMaxCached = 2e7;
    if (static_cast<double>(X.rows()) * static_cast<double>(dirs_.cols()) <= kMaxCached) {
      proj_ = X_ * dirs_;
    }
  }

  double operator()(const Eigen::VectorXd& beta) {
    ++evals_;
    const Eigen::VectorXd r = y_ - X_ * beta;
    double worst = 1.0;
    for (Eigen::Index k = 0; k < dirs_.cols(); ++k) {
      const double d = proj_.size() ? count_depth(proj_.col(k), r, t_)
                                    : count_depth(X_ * dirs_.col(k), r, t_);
      worst = std::min(worst, d);
    }
    Eigen::VectorXd g = Eigen::VectorXd::Zero(X_.cols());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      if (r(i) != 0.0) g += (r(i) > 0.0 ? 1.0 : -1.0) * X_.row(i).transpose();
    }
    const double gn = g.norm();
    if (gn > 0.0) {
      const Eigen::VectorXd v = -g / gn;
      worst = std::min(worst, count_depth(X_ * v, r, t_));
      worst = std::min(worst, count_depth(-(X_ * v), r, t_));
    }
    return worst;
  }

  int evals() const { return evals_; }

 private:
  const Eigen::MatrixXd& X_;
  const Eigen::VectorXd& y_;
  double t_;
  Eigen::MatrixXd dirs_;
  Eigen::MatrixXd proj_;
  int evals_ = 0;
};

// Nelder-Mead maximization; returns the best vertex.
Eigen::VectorXd nelder_mead_max(DepthObjective& f, const Eigen::VectorXd& start,
                                double step, int max_evals, double* best_value,
                                double* spread) {
  const Eigen::Index p = start.size();
  std::vector<Eigen::VectorXd> pts(p + 1, start);
  std::vector<double> vals(p + 1);
  for (Eigen::Index j = 0; j < p; ++j) pts[j + 1](j) += step;
  for (Eigen::Index j = 0; j <= p; ++j) vals[j] = f(pts[j]);
  const int budget = f.evals() + max_evals;

  std::vector<Eigen::Index> order(p + 1);
  while (f.evals() < budget) {
    for (Eigen::Index j = 0; j <= p; ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return vals[a] > vals[b]; });
    const Eigen::Index best = order.front();
    const Eigen::Index worst = order.back();
    const Eigen::Index second = order[p - 1];
    double diameter = 0.0;
    for (Eigen::Index j = 0; j <= p; ++j) {
      diameter = std::max(diameter, (pts[j] - pts[best]).cwiseAbs().maxCoeff());
    }
    if (diameter < 1e-10 * (1.0 + pts[best].cwiseAbs().maxCoeff())) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j <= p; ++j) {
      if (j != worst) centroid += pts[j];
    }
    centroid /= static_cast<double>(p);

    const Eigen::VectorXd refl = centroid + (centroid - pts[worst]);
    const double fr = f(refl);
    if (fr > vals[best]) {
      const Eigen::VectorXd expd = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = f(expd);
      if (fe > fr) {
        pts[worst] = expd;
        vals[worst] = fe;
      } else {
        pts[worst] = refl;
        vals[worst] = fr;
      }
    } else if (fr > vals[second]) {
      pts[worst] = refl;
      vals[worst] = fr;
    } else {
      const Eigen::VectorXd contr = centroid + 0.5 * (pts[worst] - centroid);
      const double fc = f(contr);
      if (fc > vals[worst]) {
        pts[worst] = contr;
        vals[worst] = fc;
      } else {
        for (Eigen::Index j = 0; j <= p; ++j) {
          if (j == best) continue;
          pts[j] = pts[best] + 0.5 * (pts[j] - pts[best]);
          vals[j] = f(pts[j]);
        }
      }
    }
  }
  Eigen::Index best = 0;
  double lowest = vals[0];
  for (Eigen::Index j = 1; j <= p; ++j) {
    if (vals[j] > vals[best]) best = j;
    lowest = std::min(lowest, vals[j]);
  }
  *best_value = vals[best];
  *spread = vals[best] - lowest;
  return pts[best];
}

}  // namespace

Eigen::MatrixXd random_directions(int p, int count, RngStream& rng) {
  Eigen::MatrixXd dirs(p, count);
  for (int k = 0; k < count; ++k) {
    double norm = 0.0;
    do {
      for (int j = 0; j < p; ++j) dirs(j, k) = rng.normal();
      norm = dirs.col(k).norm();
    } while (norm == 0.0);
    dirs.col(k) /= norm;
  }
  return dirs;
}

double depth_eval(const Eigen::VectorXd& beta, const Eigen::MatrixXd& X,
                  const Eigen::VectorXd& y, double t,
                  const Eigen::MatrixXd& directions) {
  const Eigen::Index p = X.cols();
  if (beta.size() != p || y.size() != X.rows() || X.rows() == 0) {
    throw PreconditionError("depth_eval: dimension mismatch");
  }
  if (!(t >= 0.0)) throw PreconditionError("depth_eval: t must be non-negative");
  check_directions(directions, p);
  const Eigen::VectorXd r = y - X * beta;
  double worst = 1.0;
  for (Eigen::Index k = 0; k < directions.cols(); ++k) {
    worst = std::min(worst, count_depth(X * directions.col(k), r, t));
  }
  return worst;
}

FitReport depth_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double t,
                    const DepthOptions& options, RngStream& rng) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n) throw PreconditionError("depth_max: X and y differ in length");
  if (!(n > p) || p < 1) throw PreconditionError("depth_max: need n > p >= 1");
  if (p > options.max_dim) {
    throw UnsupportedError("depth_max: dimension above the configured cap");
  }
  if (!(t >= 0.0)) throw PreconditionError("depth_max: t must be non-negative");
  if (p == 1) return depth_max_1d(X, y, t);

  const Eigen::MatrixXd dirs =
      random_directions(static_cast<int>(p), options.directions_per_dim * static_cast<int>(p), rng);
  DepthObjective objective(X, y, t, dirs);

  Eigen::VectorXd start;
  try {
    start = lad_fit(X, y).beta_hat;
  } catch (const ConvergenceError& e) {
    start = e.last_iterate();
  }
  const Eigen::VectorXd r0 = y - X * start;
  std::vector<double> absr(r0.size());
  for (Eigen::Index i = 0; i < r0.size(); ++i) absr[i] = std::abs(r0(i));
  std::nth_element(absr.begin(), absr.begin() + absr.size() / 2, absr.end());
  const double mad = absr[absr.size() / 2];
  const double step = std::max(1e-3, 3.0 * mad * std::sqrt(static_cast<double>(p) / n));

  FitReport out;
  double best_value = -1.0;
  double best_spread = 0.0;
  for (int s = 0; s < std::max(1, options.restarts); ++s) {
    Eigen::VectorXd init = start;
    if (s > 0) {
      for (Eigen::Index j = 0; j < p; ++j) init(j) += step * rng.normal();
    }
    double value = 0.0;
    double spread = 0.0;
    const Eigen::VectorXd cand =
        nelder_mead_max(objective, init, step, options.max_evals * static_cast<int>(p),
                        &value, &spread);
    if (value > best_value) {
      best_value = value;
      best_spread = spread;
      out.beta_hat = cand;
    }
  }
  out.objective = best_value;
  out.certificate = best_spread;
  out.iterations = objective.evals();
  return out;
}

}  // namespace robreg

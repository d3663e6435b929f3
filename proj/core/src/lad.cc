#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "robreg/errors.hpp"
#include "robreg/estimators.hpp"

namespace robreg {
namespace {

double median_abs(const Eigen::VectorXd& v) {
  std::vector<double> a(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) a[i] = std::abs(v(i));
  const std::size_t mid = a.size() / 2;
  std::nth_element(a.begin(), a.begin() + mid, a.end());
  return a[mid];
}

double smoothed_certificate(const Eigen::MatrixXd& X, const Eigen::VectorXd& r,
                            double mu) {
  const Eigen::VectorXd s = r.array() / (r.array().square() + mu * mu).sqrt();
  return (X.transpose() * s).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
}

// One descent step on sum sqrt(r_i^2 + mu^2): a Newton step (curvature
// weights mu^2 / q^{3/2}) with backtracking, else the reweighted least
// squares step (weights 1 / sqrt(q)), which always descends.
Eigen::VectorXd smoothed_step(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& beta, double mu, Eigen::VectorXd* w,
                              Eigen::VectorXd* h) {
  const Eigen::VectorXd r = y - X * beta;
  const Eigen::ArrayXd q = r.array().square() + mu * mu;
  const Eigen::ArrayXd root = q.sqrt();
  *w = root.inverse().matrix();
  *h = (mu * mu / (q * root)).matrix();
  const double f0 = root.sum();

  const Eigen::VectorXd grad = X.transpose() * (r.array() * w->array()).matrix();
  const Eigen::LDLT<Eigen::MatrixXd> newton((X.transpose() * h->asDiagonal() * X).eval());
  if (newton.info() == Eigen::Success && newton.isPositive()) {
    const Eigen::VectorXd delta = newton.solve(grad);
    if (delta.allFinite()) {
      const Eigen::VectorXd xd = X * delta;
      double step = 1.0;
      for (int k = 0; k < 30; ++k, step *= 0.5) {
        const double f = ((r - step * xd).array().square() + mu * mu).sqrt().sum();
        if (f < f0) return beta + step * delta;
        if (f == f0) break;
      }
    }
  }
  const Eigen::MatrixXd XtW = X.transpose() * w->asDiagonal();
  return (XtW * X).ldlt().solve(XtW * y);
}

// Tries the LP vertex interpolating the p smallest residuals and accepts it
// when the subgradient optimality system has a dual in [-1, 1]^p.
bool polish_vertex(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& beta, Eigen::VectorXd* vertex) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const Eigen::VectorXd r = y - X * beta;
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::partial_sort(order.begin(), order.begin() + p, order.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      return std::abs(r(a)) < std::abs(r(b));
                    });
  Eigen::MatrixXd XA(p, p);
  Eigen::VectorXd yA(p);
  std::vector<char> active(n, 0);
  for (Eigen::Index k = 0; k < p; ++k) {
    XA.row(k) = X.row(order[k]);
    yA(k) = y(order[k]);
    active[order[k]] = 1;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(XA);
  if (!lu.isInvertible()) return false;
  const Eigen::VectorXd cand = lu.solve(yA);
  const Eigen::VectorXd rc = y - X * cand;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (active[i] || rc(i) == 0.0) continue;
    g += (rc(i) > 0.0 ? 1.0 : -1.0) * X.row(i).transpose();
  }
  const Eigen::VectorXd u = lu.transpose().solve(-g);
  if (!u.allFinite() || u.cwiseAbs().maxCoeff() > 1.0 + 1e-9) return false;
  *vertex = cand;
  return true;
}

}  // namespace

FitReport lad_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const LadOptions& options) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n) throw PreconditionError("lad_fit: X and y differ in length");
  if (!(n > p) || p < 1) throw PreconditionError("lad_fit: need n > p >= 1");

  const double col_scale = (X.cwiseAbs().colwise().sum() / static_cast<double>(n)).maxCoeff();
  if (!(col_scale > 0.0)) throw PreconditionError("lad_fit: design is identically zero");

  FitReport out;
  double scale = median_abs(y);
  if (!(scale > 0.0)) scale = y.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) {
    out.beta_hat = Eigen::VectorXd::Zero(p);
    return out;
  }

  Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  const double mu_min = options.mu_floor * scale;
  const double beta_floor = 1e-8 * scale / col_scale;
  double mu = scale;
  double cert = 0.0;
  int total = 0;
  bool done = false;
  Eigen::VectorXd w(n);
  Eigen::VectorXd h(n);
  while (!done) {
    for (int it = 0; it < options.max_inner; ++it) {
      const Eigen::VectorXd next = smoothed_step(X, y, beta, mu, &w, &h);
      const double change = (next - beta).norm() / std::max(next.norm(), beta_floor);
      beta = next;
      if (++total > options.max_total || !beta.allFinite()) {
        throw ConvergenceError("lad_fit: IRLS iteration cap reached", beta,
                               smoothed_certificate(X, y - X * beta, mu));
      }
      if (change < options.inner_tol) break;
    }
    cert = smoothed_certificate(X, y - X * beta, mu);

    Eigen::VectorXd vertex;
    if (options.polish && polish_vertex(X, y, beta, &vertex)) {
      beta = vertex;
      done = true;
    } else if (mu <= mu_min) {
      done = true;
    } else {
      mu = std::max(0.5 * mu, mu_min);
    }
  }

  if (!(cert <= options.certificate_tol * col_scale)) {
    throw ConvergenceError("lad_fit: stationarity certificate above tolerance", beta,
                           cert);
  }
  out.beta_hat = beta;
  out.objective = (y - X * beta).cwiseAbs().sum() / static_cast<double>(n);
  out.certificate = cert;
  out.iterations = total;
  return out;
}

}  // namespace robreg

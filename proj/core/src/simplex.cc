// Bounded-variable primal simplex for the homogenized Chebyshev problem
//
//   maximize lambda  s.t.  A w - b lambda = 0,  -1 <= w_k <= 1,  lambda >= 0,
//
// whose optimum gives r = w / lambda with ||r||_inf = 1 / lambda.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "robreg/errors.hpp"
#include "robreg/numerics.hpp"

namespace robreg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCostTol = 1e-11;
constexpr double kPivotTol = 1e-10;
constexpr int kBlandAfter = 64;

struct BoundedLp {
  Eigen::MatrixXd cols;  // rows x vars
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> x;
  std::vector<int> basis;
  std::vector<char> is_basic;
};

class Simplex {
 public:
  explicit Simplex(BoundedLp& lp) : lp_(lp) {}

  // Maximizes cost^T x from the current basic feasible point.
  int run(const std::vector<double>& cost, int max_iter) {
    const int rows = static_cast<int>(lp_.cols.rows());
    const int vars = static_cast<int>(lp_.cols.cols());
    int degenerate_run = 0;
    for (int iter = 0; iter < max_iter; ++iter) {
      refactor();
      Eigen::VectorXd cb(rows);
      for (int i = 0; i < rows; ++i) cb(i) = cost[lp_.basis[i]];
      y_ = binv_.transpose() * cb;

      const bool bland = degenerate_run > kBlandAfter;
      int enter = -1;
      double best = 0.0;
      double dir = 0.0;
      for (int j = 0; j < vars; ++j) {
        if (lp_.is_basic[j] || lp_.upper[j] - lp_.lower[j] <= 0.0) continue;
        const double d = cost[j] - y_.dot(lp_.cols.col(j));
        double s = 0.0;
        if (d > kCostTol && lp_.x[j] < lp_.upper[j]) s = 1.0;
        if (d < -kCostTol && lp_.x[j] > lp_.lower[j]) s = -1.0;
        if (s == 0.0) continue;
        if (bland) {
          enter = j;
          dir = s;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          enter = j;
          dir = s;
        }
      }
      if (enter < 0) {
        flip_sweep(cost);
        return iter;
      }

      const Eigen::VectorXd alpha = binv_ * lp_.cols.col(enter);
      double theta = lp_.upper[enter] - lp_.lower[enter];
      int leave = -1;
      for (int i = 0; i < rows; ++i) {
        const double rate = -dir * alpha(i);
        if (std::abs(rate) <= kPivotTol) continue;
        const int bj = lp_.basis[i];
        const double room = rate < 0.0 ? lp_.x[bj] - lp_.lower[bj]
                                       : lp_.upper[bj] - lp_.x[bj];
        const double step = std::max(room, 0.0) / std::abs(rate);
        if (step < theta || (bland && step == theta && leave >= 0 &&
                             bj < lp_.basis[leave])) {
          theta = step;
          leave = i;
        }
      }
      if (theta == kInf) {
        throw NumericalError("cheb_min_inf_solve: unbounded program");
      }
      degenerate_run = theta <= 1e-14 ? degenerate_run + 1 : 0;

      lp_.x[enter] += dir * theta;
      for (int i = 0; i < rows; ++i) {
        lp_.x[lp_.basis[i]] -= dir * theta * alpha(i);
      }
      if (leave >= 0) {
        const int out = lp_.basis[leave];
        const double rate = -dir * alpha(leave);
        lp_.x[out] = rate < 0.0 ? lp_.lower[out] : lp_.upper[out];
        lp_.is_basic[out] = 0;
        lp_.basis[leave] = enter;
        lp_.is_basic[enter] = 1;
      }
    }
    throw NumericalError("cheb_min_inf_solve: simplex iteration limit reached");
  }

  const Eigen::VectorXd& duals() const { return y_; }

  // Columns whose reduced cost is below the absolute tolerance but has a
  // reliable sign move to their better bound when no basic variable blocks.
  void flip_sweep(const std::vector<double>& cost) {
    const int rows = static_cast<int>(lp_.cols.rows());
    for (int j = 0; j < lp_.cols.cols(); ++j) {
      if (lp_.is_basic[j]) continue;
      const double range = lp_.upper[j] - lp_.lower[j];
      if (!(range > 0.0) || range == kInf) continue;
      const double d = cost[j] - y_.dot(lp_.cols.col(j));
      const double tol =
          kCostTol * (std::abs(cost[j]) + y_.cwiseAbs().dot(lp_.cols.col(j).cwiseAbs()));
      double dir = 0.0;
      if (d > tol && lp_.x[j] < lp_.upper[j]) dir = 1.0;
      if (d < -tol && lp_.x[j] > lp_.lower[j]) dir = -1.0;
      if (dir == 0.0) continue;
      const double theta = dir > 0.0 ? lp_.upper[j] - lp_.x[j] : lp_.x[j] - lp_.lower[j];
      const Eigen::VectorXd alpha = binv_ * lp_.cols.col(j);
      bool blocked = false;
      for (int i = 0; i < rows && !blocked; ++i) {
        const int bj = lp_.basis[i];
        const double next = lp_.x[bj] - dir * theta * alpha(i);
        blocked = next < lp_.lower[bj] || next > lp_.upper[bj];
      }
      if (blocked) continue;
      lp_.x[j] += dir * theta;
      for (int i = 0; i < rows; ++i) lp_.x[lp_.basis[i]] -= dir * theta * alpha(i);
    }
  }

  // Recomputes basic values from the nonbasic ones.
  void resolve_basics() {
    refactor();
    const int rows = static_cast<int>(lp_.cols.rows());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
    for (int j = 0; j < lp_.cols.cols(); ++j) {
      if (!lp_.is_basic[j] && lp_.x[j] != 0.0) rhs -= lp_.cols.col(j) * lp_.x[j];
    }
    const Eigen::VectorXd xb = binv_ * rhs;
    for (int i = 0; i < rows; ++i) lp_.x[lp_.basis[i]] = xb(i);
  }

 private:
  void refactor() {
    const int rows = static_cast<int>(lp_.cols.rows());
    Eigen::MatrixXd bmat(rows, rows);
    for (int i = 0; i < rows; ++i) bmat.col(i) = lp_.cols.col(lp_.basis[i]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(bmat);
    if (!lu.isInvertible()) {
      throw NumericalError("cheb_min_inf_solve: singular basis");
    }
    binv_ = lu.inverse();
  }

  BoundedLp& lp_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd y_;
};

}  // namespace

ChebSolution cheb_min_inf_solve(const Eigen::MatrixXd& A,
                                const Eigen::VectorXd& b) {
  const int rows = static_cast<int>(A.rows());
  const int K = static_cast<int>(A.cols());
  if (b.size() != rows || rows == 0 || K == 0) {
    throw PreconditionError("cheb_min_inf_solve: dimension mismatch");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A.transpose());
  qr.setThreshold(1e-12);
  if (qr.rank() < rows) {
    throw PreconditionError("cheb_min_inf_solve: constraint rows are rank deficient");
  }

  ChebSolution out;
  if (b.cwiseAbs().maxCoeff() == 0.0) {
    out.r = Eigen::VectorXd::Zero(K);
    return out;
  }

  // Row scaling leaves the solution set unchanged.
  Eigen::VectorXd row_scale(rows);
  for (int i = 0; i < rows; ++i) {
    const double s = std::max(A.row(i).cwiseAbs().maxCoeff(), std::abs(b(i)));
    row_scale(i) = 1.0 / s;
  }
  const Eigen::MatrixXd As = row_scale.asDiagonal() * A;
  const Eigen::VectorXd bs = row_scale.asDiagonal() * b;

  // Columns: w_0..w_{K-1}, lambda, artificials.
  const int lam = K;
  const int vars = K + 1 + rows;
  BoundedLp lp;
  lp.cols = Eigen::MatrixXd::Zero(rows, vars);
  lp.cols.leftCols(K) = As;
  lp.cols.col(lam) = -bs;
  lp.lower.assign(vars, -1.0);
  lp.upper.assign(vars, 1.0);
  lp.lower[lam] = 0.0;
  lp.upper[lam] = kInf;
  lp.x.assign(vars, 0.0);
  lp.is_basic.assign(vars, 0);

  Eigen::VectorXd resid = Eigen::VectorXd::Zero(rows);
  for (int k = 0; k < K; ++k) {
    lp.x[k] = -1.0;
    resid -= As.col(k);
  }
  // With w = -1 the rows read resid + c_i a_i = 0, so c_i = -sign(resid_i).
  for (int i = 0; i < rows; ++i) {
    const int art = K + 1 + i;
    lp.cols(i, art) = resid(i) >= 0.0 ? -1.0 : 1.0;
    lp.lower[art] = 0.0;
    lp.upper[art] = kInf;
    lp.x[art] = std::abs(resid(i));
    lp.basis.push_back(art);
    lp.is_basic[art] = 1;
  }

  Simplex simplex(lp);
  const int max_iter = 50 * (K + rows) + 1000;

  std::vector<double> phase1(vars, 0.0);
  for (int i = 0; i < rows; ++i) phase1[K + 1 + i] = -1.0;
  out.iterations = simplex.run(phase1, max_iter);
  double infeas = 0.0;
  for (int i = 0; i < rows; ++i) infeas += lp.x[K + 1 + i];
  if (infeas > 1e-9) {
    throw InfeasibleError("cheb_min_inf_solve: no feasible point found");
  }
  for (int i = 0; i < rows; ++i) {
    const int art = K + 1 + i;
    lp.lower[art] = 0.0;
    lp.upper[art] = 0.0;
    if (!lp.is_basic[art]) lp.x[art] = 0.0;
  }

  std::vector<double> phase2(vars, 0.0);
  phase2[lam] = 1.0;
  out.iterations += simplex.run(phase2, max_iter);
  simplex.resolve_basics();

  const double lambda = lp.x[lam];
  if (!(lambda > 0.0)) {
    throw NumericalError("cheb_min_inf_solve: degenerate optimum");
  }
  out.r.resize(K);
  for (int k = 0; k < K; ++k) out.r(k) = lp.x[k] / lambda;
  out.norm = out.r.cwiseAbs().maxCoeff();
  out.residual = (A * out.r - b).cwiseAbs().maxCoeff();

  const Eigen::VectorXd& y = simplex.duals();
  const double denom = (As.transpose() * y).cwiseAbs().sum();
  out.lower_bound = denom > 0.0 ? std::abs(y.dot(bs)) / denom : 0.0;
  return out;
}

}  // namespace robreg

#include "robreg/sq_hardness.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "robreg/errors.hpp"

namespace robreg {
namespace {

constexpr int kProbeDegrees = 5;

std::vector<double> y_check_grid() {
  std::vector<double> ys(41);
  for (int k = 0; k < 41; ++k) ys[k] = -6.0 + 0.3 * k;
  return ys;
}

void write_block(std::ostream& os, const std::string& name,
                 const std::vector<double>& values) {
  os << name << ' ' << values.size() << '\n';
  for (std::size_t k = 0; k < values.size(); ++k) {
    os << fmt::format("{:.17g}", values[k]) << (k + 1 == values.size() ? '\n' : ' ');
  }
}

std::vector<double> read_block(std::istream& is, const std::string& name) {
  std::string tag;
  std::size_t count = 0;
  if (!(is >> tag >> count) || tag != name) {
    throw IoError("hardness import: expected block '" + name + "'");
  }
  std::vector<double> values(count);
  for (double& v : values) {
    if (!(is >> v)) throw IoError("hardness import: truncated block '" + name + "'");
  }
  return values;
}

}  // namespace

void hermite_all(int k, double x, double* out) {
  out[0] = 1.0;
  if (k == 0) return;
  out[1] = x;
  for (int j = 1; j < k; ++j) {
    out[j + 1] = (x * out[j] - std::sqrt(static_cast<double>(j)) * out[j - 1]) /
                 std::sqrt(static_cast<double>(j + 1));
  }
}

double hermite_eval(int k, double x) {
  if (k < 0) throw PreconditionError("hermite_eval: degree must be non-negative");
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int j = 1; j < k; ++j) {
    const double next = (x * cur - std::sqrt(static_cast<double>(j)) * prev) /
                        std::sqrt(static_cast<double>(j + 1));
    prev = cur;
    cur = next;
  }
  return cur;
}

double hermite_shift_identity_check(int i, double rho, double mu) {
  if (i < 0 || !(rho > 0.0 && rho <= 1.0)) {
    throw PreconditionError("hermite_shift_identity_check: need i >= 0, rho in (0, 1]");
  }
  const Grid1D g = Grid1D::uniform(-12.0, 12.0, 4001);
  const double s = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  std::vector<double> f(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double z = g.nodes()[k];
    f[k] = hermite_eval(i, rho * mu + s * z) * normal_pdf(z);
  }
  return std::abs(integrate_grid(f, g) - std::pow(rho, i) * hermite_eval(i, mu));
}

double target_bound(int i, int m) {
  const double reach = std::sqrt(32.0 * m);
  constexpr int kSteps = 200000;
  double best = 0.0;
  for (int k = 0; k <= kSteps; ++k) {
    const double x = -reach + 2.0 * reach * k / kSteps;
    best = std::max(best, std::abs(hermite_eval(i, x)));
  }
  return 2.0 * best;
}

GTables build_g(int m, const Grid1D& grid_x) {
  if (m < 1) throw PreconditionError("build_g: m must be positive");
  const std::size_t K = grid_x.size();
  Eigen::MatrixXd A(m + 1, static_cast<Eigen::Index>(K));
  std::vector<double> he(m + 1);
  for (std::size_t k = 0; k < K; ++k) {
    const double x = grid_x.nodes()[k];
    hermite_all(m, x, he.data());
    const double wphi = grid_x.weights()[k] * normal_pdf(x);
    for (int j = 0; j <= m; ++j) A(j, static_cast<Eigen::Index>(k)) = wphi * he[j];
  }

  GTables out;
  out.grid = grid_x;
  for (int i = 1; i <= m; ++i) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m + 1);
    b(i) = 1.0;
    const ChebSolution sol = cheb_min_inf_solve(A, b);
    out.max_moment_residual = std::max(out.max_moment_residual, sol.residual);
    out.achieved_B.push_back(sol.norm);
    out.lp_lower_bound.push_back(sol.lower_bound);
    out.target_B.push_back(target_bound(i, m));
    out.g_over_phi.emplace_back(sol.r.data(), sol.r.data() + sol.r.size());
    if (sol.norm > out.target_B.back()) {
      throw NumericalError(fmt::format(
          "build_g: achieved bound {:.6g} for i={} exceeds target {:.6g}", sol.norm, i,
          out.target_B.back()));
    }
  }
  return out;
}

HardInstance HardInstance::build(int m, double epsilon, double delta) {
  return build(m, epsilon, delta, Grid1D::hardness_default(std::max(m, 1)));
}

HardInstance HardInstance::build(int m, double epsilon, double delta,
                                 const Grid1D& grid) {
  if (m < 0) throw PreconditionError("build_instance: m must be non-negative");
  if (!(epsilon >= 0.0 && epsilon < 0.5)) {
    throw PreconditionError("build_instance: epsilon must lie in [0, 1/2)");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw PreconditionError("build_instance: delta must lie in (0, 1)");
  }
  HardInstance inst;
  inst.m_ = m;
  inst.epsilon_ = epsilon;
  inst.delta_ = delta;
  inst.grid_x_ = grid;
  inst.grid_y_ = grid;
  if (m > 0) {
    GTables g = build_g(m, grid);
    inst.g_over_phi_ = std::move(g.g_over_phi);
    inst.achieved_B_ = std::move(g.achieved_B);
    inst.target_B_ = std::move(g.target_B);
  }
  inst.finish();
  return inst;
}

void HardInstance::finish() {
  const auto& ys = grid_y_.nodes();
  phi_y_.resize(ys.size());
  for (std::size_t k = 0; k < ys.size(); ++k) phi_y_[k] = normal_pdf(ys[k]);
  const std::vector<double>& phi = phi_y_;

  kappa_ = 0.0;
  std::vector<double> tmp(ys.size());
  for (int i = 1; i <= m_; ++i) {
    for (std::size_t k = 0; k < ys.size(); ++k) tmp[k] = phi[k] * std::abs(a(i, ys[k]));
    kappa_ += achieved_B_[i - 1] * integrate_grid(tmp, grid_y_);
  }
  if (kappa_ > 1.0) {
    throw InfeasibleError(fmt::format(
        "build_instance: kappa = sum_i B_i int phi |a_i| = {:.6g} exceeds 1", kappa_));
  }
  a_grid_.assign(m_, std::vector<double>(ys.size()));
  for (int i = 1; i <= m_; ++i) {
    for (std::size_t k = 0; k < ys.size(); ++k) a_grid_[i - 1][k] = a(i, ys[k]);
  }
  std::vector<double> d(ys.size()), r(ys.size());
  for (std::size_t k = 0; k < ys.size(); ++k) {
    d[k] = D_at(ys[k]);
    r[k] = (1.0 - epsilon_) * phi[k] + epsilon_ * d[k];
  }
  D_ = TabulatedDensity(grid_y_, std::move(d));
  R_ = TabulatedDensity(grid_y_, std::move(r));
}

double HardInstance::a(int i, double y) const {
  if (epsilon_ == 0.0) return 0.0;
  return -((1.0 - epsilon_) / epsilon_) * std::pow(delta_, i) * hermite_eval(i, y);
}

double HardInstance::D_at(double y) const {
  double excess = 0.0;
  for (int i = 1; i <= m_; ++i) excess += std::abs(a(i, y)) * achieved_B_[i - 1];
  return normal_pdf(y) * ((1.0 - kappa_) + excess);
}

double HardInstance::R_at(double y) const {
  return (1.0 - epsilon_) * normal_pdf(y) + epsilon_ * D_at(y);
}

double HardInstance::g_over_phi_at(int i, double x) const {
  const auto& nodes = grid_x_.nodes();
  const auto& table = g_over_phi_[i - 1];
  if (x <= nodes.front()) return table.front();
  if (x >= nodes.back()) return table.back();
  const auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - nodes.begin());
  const double s = (x - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
  return (1.0 - s) * table[k - 1] + s * table[k];
}

double HardInstance::fluctuation_ratio(double y, double x) const {
  if (m_ == 0 || epsilon_ == 0.0) return 0.0;
  double total = 0.0;
  for (int i = 1; i <= m_; ++i) total += a(i, y) * g_over_phi_at(i, x);
  return normal_pdf(y) / D_at(y) * total;
}

double HardInstance::density_Ay(double y, double x) const {
  const double phi_y = normal_pdf(y);
  const double d = D_at(y);
  const double gauss = normal_pdf(x, delta_ * y, sigma2());
  const double contaminated = d * normal_pdf(x) * (1.0 + fluctuation_ratio(y, x));
  return ((1.0 - epsilon_) * phi_y * gauss + epsilon_ * contaminated) /
         ((1.0 - epsilon_) * phi_y + epsilon_ * d);
}

TabulatedDensity HardInstance::E_x(double x) const {
  const auto& ys = grid_y_.nodes();
  std::vector<double> r(m_);
  for (int i = 1; i <= m_; ++i) r[i - 1] = g_over_phi_at(i, x);
  const auto& d = D_.values();
  std::vector<double> values(ys.size());
  for (std::size_t k = 0; k < ys.size(); ++k) {
    double s = 0.0;
    for (int i = 0; i < m_; ++i) s += a_grid_[i][k] * r[i];
    values[k] = d[k] + phi_y_[k] * s;
    if (values[k] < -1e-12) {
      throw NumericalError("E_x: tabulated density is negative");
    }
  }
  return TabulatedDensity(grid_y_, std::move(values));
}

HardVerification HardInstance::verify() const {
  HardVerification out;
  const auto& xs = grid_x_.nodes();
  const auto& ys = grid_y_.nodes();
  const std::size_t K = xs.size();

  std::vector<std::vector<double>> he_x(m_ + 1, std::vector<double>(K));
  std::vector<double> he(m_ + 1);
  for (std::size_t k = 0; k < K; ++k) {
    hermite_all(m_, xs[k], he.data());
    for (int j = 0; j <= m_; ++j) he_x[j][k] = he[j];
  }

  std::vector<double> ay(K), tmp(K);
  out.min_Ay = std::numeric_limits<double>::infinity();
  for (double y : y_check_grid()) {
    for (std::size_t k = 0; k < K; ++k) {
      ay[k] = density_Ay(y, xs[k]);
      out.min_Ay = std::min(out.min_Ay, ay[k]);
    }
    out.ay_mass_residual =
        std::max(out.ay_mass_residual, std::abs(integrate_grid(ay, grid_x_) - 1.0));
    for (int j = 1; j <= m_; ++j) {
      for (std::size_t k = 0; k < K; ++k) tmp[k] = he_x[j][k] * ay[k];
      out.moment_residual = std::max(out.moment_residual, std::abs(integrate_grid(tmp, grid_x_)));
    }
  }

  // Fluctuation bound and marginal preservation over the full grids.
  std::vector<double> dy(ys.size()), phiy(ys.size());
  std::vector<std::vector<double>> ay_coef(m_, std::vector<double>(ys.size()));
  for (std::size_t k = 0; k < ys.size(); ++k) {
    dy[k] = D_at(ys[k]);
    phiy[k] = normal_pdf(ys[k]);
    for (int i = 1; i <= m_; ++i) ay_coef[i - 1][k] = a(i, ys[k]);
  }
  const auto& wy = grid_y_.weights();
  for (std::size_t kx = 0; kx < K; ++kx) {
    const double phix = normal_pdf(xs[kx]);
    double marginal = 0.0;
    for (std::size_t ky = 0; ky < ys.size(); ++ky) {
      double s = 0.0;
      for (int i = 0; i < m_; ++i) s += ay_coef[i][ky] * g_over_phi_[i][kx];
      const double f = phiy[ky] / dy[ky] * s;  // f_y(x) / phi(x)
      out.fluctuation_excess = std::max(out.fluctuation_excess, (std::abs(f) - 1.0) * phix);
      marginal += wy[ky] * dy[ky] * phix * (1.0 + f);
    }
    out.marginal_residual = std::max(out.marginal_residual, std::abs(marginal - phix));
  }

  for (int i = 0; i < m_; ++i) {
    for (int j = 0; j <= m_; ++j) {
      for (std::size_t k = 0; k < K; ++k) {
        tmp[k] = he_x[j][k] * g_over_phi_[i][k] * normal_pdf(xs[k]);
      }
      const double target = (j == i + 1) ? 1.0 : 0.0;
      out.g_moment_residual =
          std::max(out.g_moment_residual, std::abs(integrate_grid(tmp, grid_x_) - target));
    }
  }
  out.mass_D = D_.mass();
  out.mass_R = R_.mass();
  return out;
}

double HardInstance::chi2_avg() const {
  const auto& xs = grid_x_.nodes();
  const auto& ys = grid_y_.nodes();
  const auto& wx = grid_x_.weights();
  const auto& wy = grid_y_.weights();
  const double s2 = sigma2();
  std::vector<double> phix(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) phix[k] = normal_pdf(xs[k]);

  double total = 0.0;
  for (std::size_t ky = 0; ky < ys.size(); ++ky) {
    const double y = ys[ky];
    const double phiy = normal_pdf(y);
    const double d = D_at(y);
    const double r = (1.0 - epsilon_) * phiy + epsilon_ * d;
    if (!(r > 0.0)) continue;
    std::vector<double> coef(m_);
    for (int i = 1; i <= m_; ++i) coef[i - 1] = a(i, y);
    double second = 0.0;
    for (std::size_t kx = 0; kx < xs.size(); ++kx) {
      const double x = xs[kx];
      const double z = x - delta_ * y;
      const double gauss_ratio = std::exp(-0.5 * z * z / s2 + 0.5 * x * x) / std::sqrt(s2);
      double s = 0.0;
      for (int i = 0; i < m_; ++i) s += coef[i] * g_over_phi_[i][kx];
      const double f = m_ > 0 && epsilon_ > 0.0 ? phiy / d * s : 0.0;
      const double h = ((1.0 - epsilon_) * phiy * gauss_ratio + epsilon_ * d * (1.0 + f)) / r;
      second += wx[kx] * phix[kx] * h * h;
    }
    total += wy[ky] * r * (second - 1.0);
  }
  return total;
}

double HardInstance::sample_outlier(double x_proj, RngStream& rng) const {
  if (m_ == 0 || epsilon_ == 0.0) return D_.sample(rng);
  return E_x(x_proj).sample(rng);
}

ContaminatedSample HardInstance::sample_alt(const Eigen::VectorXd& v, int n,
                                            RngStream& rng) const {
  const Eigen::Index p = v.size();
  if (p < 1 || std::abs(v.norm() - 1.0) > 1e-12) {
    throw PreconditionError("sample_alt: v must be a unit vector");
  }
  if (n < 1) throw PreconditionError("sample_alt: n must be positive");
  ContaminatedSample out;
  out.X.resize(n, p);
  out.y.resize(n);
  out.inlier_mask.assign(n, true);
  const double s = std::sqrt(sigma2());
  Eigen::VectorXd g(p);
  for (int i = 0; i < n; ++i) {
    const double xp = rng.normal();
    for (Eigen::Index j = 0; j < p; ++j) g(j) = rng.normal();
    g -= v.dot(g) * v;
    out.X.row(i) = (xp * v + g).transpose();
    const bool flagged = rng.uniform() < epsilon_;
    out.inlier_mask[i] = !flagged;
    out.y(i) = flagged ? sample_outlier(xp, rng) : delta_ * xp + s * rng.normal();
  }
  return out;
}

ContaminatedSample HardInstance::sample_null(int p, int n, RngStream& rng) const {
  if (p < 1 || n < 1) throw PreconditionError("sample_null: need p, n >= 1");
  ContaminatedSample out;
  out.X.resize(n, p);
  out.y.resize(n);
  out.inlier_mask.assign(n, true);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) out.X(i, j) = rng.normal();
    out.y(i) = R_.sample(rng);
  }
  return out;
}

void HardInstance::export_text(std::ostream& os) const {
  os << fmt::format("sqhard v1 m={} eps={:.17g} delta={:.17g}\n", m_, epsilon_, delta_);
  write_block(os, "grid_x", grid_x_.nodes());
  write_block(os, "grid_y", grid_y_.nodes());
  write_block(os, "achieved_B", achieved_B_);
  write_block(os, "target_B", target_B_);
  for (int i = 0; i < m_; ++i) write_block(os, fmt::format("g_over_phi_{}", i + 1), g_over_phi_[i]);
  write_block(os, "kappa", {kappa_});
  write_block(os, "D", D_.values());
  write_block(os, "R", R_.values());
}

HardInstance HardInstance::import_text(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw IoError("hardness import: empty input");
  HardInstance inst;
  {
    std::istringstream hs(header);
    std::string magic, version, mtok, etok, dtok;
    hs >> magic >> version >> mtok >> etok >> dtok;
    if (magic != "sqhard" || version != "v1" || mtok.rfind("m=", 0) != 0 ||
        etok.rfind("eps=", 0) != 0 || dtok.rfind("delta=", 0) != 0) {
      throw IoError("hardness import: malformed header");
    }
    try {
      inst.m_ = std::stoi(mtok.substr(2));
      inst.epsilon_ = std::stod(etok.substr(4));
      inst.delta_ = std::stod(dtok.substr(6));
    } catch (const std::exception&) {
      throw IoError("hardness import: malformed header values");
    }
  }
  inst.grid_x_ = Grid1D(read_block(is, "grid_x"));
  inst.grid_y_ = Grid1D(read_block(is, "grid_y"));
  inst.achieved_B_ = read_block(is, "achieved_B");
  inst.target_B_ = read_block(is, "target_B");
  if (static_cast<int>(inst.achieved_B_.size()) != inst.m_ ||
      static_cast<int>(inst.target_B_.size()) != inst.m_) {
    throw IoError("hardness import: bound blocks do not match m");
  }
  for (int i = 0; i < inst.m_; ++i) {
    inst.g_over_phi_.push_back(read_block(is, fmt::format("g_over_phi_{}", i + 1)));
    if (inst.g_over_phi_.back().size() != inst.grid_x_.size()) {
      throw IoError("hardness import: g table does not match grid_x");
    }
  }
  const std::vector<double> kappa = read_block(is, "kappa");
  const std::vector<double> d = read_block(is, "D");
  const std::vector<double> r = read_block(is, "R");
  inst.finish();
  if (kappa.size() != 1 || kappa[0] != inst.kappa_ || d != inst.D_.values() ||
      r != inst.R_.values()) {
    throw IoError("hardness import: stored tables disagree with the recomputed ones");
  }
  return inst;
}

Eigen::MatrixXd hermite_probe(const ContaminatedSample& sample,
                              const Eigen::VectorXd& v, int m) {
  const int n = sample.n();
  if (n < 2 || v.size() != sample.p()) {
    throw PreconditionError("hermite_probe: need n >= 2 and matching direction");
  }
  const Eigen::VectorXd proj = sample.X * v;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(m, kProbeDegrees);
  Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(m, kProbeDegrees);
  std::vector<double> hx(m + 1), hy(kProbeDegrees);
  for (int i = 0; i < n; ++i) {
    hermite_all(m, proj(i), hx.data());
    hermite_all(kProbeDegrees - 1, sample.y(i), hy.data());
    for (int j = 1; j <= m; ++j) {
      for (int l = 0; l < kProbeDegrees; ++l) {
        const double z = hx[j] * hy[l];
        sum(j - 1, l) += z;
        sumsq(j - 1, l) += z * z;
      }
    }
  }
  Eigen::MatrixXd zscores(m, kProbeDegrees);
  const double nd = static_cast<double>(n);
  for (int j = 0; j < m; ++j) {
    for (int l = 0; l < kProbeDegrees; ++l) {
      const double mean = sum(j, l) / nd;
      const double var = std::max(sumsq(j, l) / nd - mean * mean, 0.0) * nd / (nd - 1.0);
      zscores(j, l) = var > 0.0 ? mean / std::sqrt(var / nd) : 0.0;
    }
  }
  return zscores;
}

}  // namespace robreg

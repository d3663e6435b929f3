#include "robreg/contamination.hpp"

#include <algorithm>
#include <cmath>

#include "robreg/errors.hpp"
#include "robreg/sq_hardness.hpp"

namespace robreg {
namespace {

// Per-row outlier tables feed an inverse-CDF sampler that normalizes its own
// cumulative sum, so a coarser grid than the diagnostic default suffices.
constexpr std::size_t kSamplerNodes = 2001;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double gaussian_pair_tv(double gap, double sigma) {
  return 2.0 * normal_cdf(std::abs(gap) / (2.0 * sigma)) - 1.0;
}

Eigen::VectorXd matched_direction(const Eigen::VectorXd& beta) {
  const double norm = beta.norm();
  if (norm > 0.0) return beta / norm;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(beta.size());
  u(0) = 1.0;
  return u;
}

void validate_hard_sq(const ModelSpec& model, const adversary::HardSq& adv) {
  if (!adv.instance) throw PreconditionError("hard_sq: missing instance");
  const HardInstance& inst = *adv.instance;
  const int p = static_cast<int>(model.beta.size());
  if (adv.v.size() != p) {
    throw PreconditionError("hard_sq: direction dimension does not match beta");
  }
  if (std::abs(adv.v.norm() - 1.0) > 1e-12) {
    throw PreconditionError("hard_sq: direction must be a unit vector");
  }
  if (model.design.kind != DesignSpec::Kind::kGaussian) {
    throw PreconditionError("hard_sq: requires the Gaussian design");
  }
  if ((model.beta - inst.delta() * adv.v).cwiseAbs().maxCoeff() > 1e-12) {
    throw PreconditionError("hard_sq: beta must equal delta * v");
  }
  if (std::abs(model.sigma * model.sigma - inst.sigma2()) > 1e-12) {
    throw PreconditionError("hard_sq: sigma^2 must equal 1 - delta^2");
  }
  if (std::abs(model.epsilon - inst.epsilon()) > 1e-15) {
    throw PreconditionError("hard_sq: epsilon must match the instance");
  }
}

}  // namespace

void validate(const ModelSpec& model) {
  validate(model.design);
  if (model.beta.size() != model.design.dim) {
    throw PreconditionError("model: beta dimension does not match design");
  }
  if (!(model.sigma > 0.0)) throw PreconditionError("model: sigma must be positive");
  if (!(model.epsilon >= 0.0 && model.epsilon < 0.5)) {
    throw PreconditionError("model: epsilon must lie in [0, 1/2)");
  }
  std::visit(
      Overloaded{
          [&](const adversary::ObliviousNoise& a) {
            if (!a.Q) throw PreconditionError("oblivious_noise: missing Q");
          },
          [&](const adversary::ObliviousResponse& a) {
            if (!a.Q) throw PreconditionError("oblivious_response: missing Q");
          },
          [&](const adversary::MatchedPair& a) {
            if (!(a.delta > 0.0)) {
              throw PreconditionError("matched_pair: delta must be positive");
            }
            if (model.epsilon > 0.0 &&
                gaussian_pair_tv(a.delta, model.sigma) >
                    model.epsilon / (1.0 - model.epsilon)) {
              throw InfeasibleError(
                  "matched_pair: 2 Phi(delta / (2 sigma)) - 1 exceeds eps / (1 - eps)");
            }
          },
          [&](const adversary::NonuniformLb&) {
            if (model.beta.norm() == 0.0) {
              throw PreconditionError("nonuniform_lb: beta must be nonzero");
            }
          },
          [&](const adversary::HardSq& a) { validate_hard_sq(model, a); },
          [&](const adversary::Conditional& a) {
            if (!a.sample) throw PreconditionError("conditional: missing sampler");
          },
          [](const auto&) {},
      },
      model.adversary);
}

TabulatedDensity gaussian_excess_density(double from, double to, double sigma,
                                         std::size_t nodes) {
  const double tv = gaussian_pair_tv(to - from, sigma);
  if (!(tv > 0.0)) {
    throw PreconditionError("gaussian_excess_density: identical means");
  }
  const double var = sigma * sigma;
  Grid1D grid = Grid1D::uniform(std::min(from, to) - 10.0 * sigma,
                                std::max(from, to) + 10.0 * sigma, nodes);
  std::vector<double> values(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double y = grid.nodes()[k];
    values[k] = std::max(normal_pdf(y, to, var) - normal_pdf(y, from, var), 0.0) / tv;
  }
  return TabulatedDensity(std::move(grid), std::move(values));
}

ContaminatedSample generate(const ModelSpec& model, int n, RngStream& rng) {
  validate(model);
  if (n < 1) throw PreconditionError("generate: n must be positive");
  const int p = model.design.dim;
  const double sigma = model.sigma;
  const double eps = model.epsilon;

  ContaminatedSample out;
  out.X.resize(n, p);
  out.y.resize(n);
  out.inlier_mask.assign(n, true);

  std::unique_ptr<NonuniformLb> lb;
  if (std::holds_alternative<adversary::NonuniformLb>(model.adversary)) {
    lb = std::make_unique<NonuniformLb>(model.beta, sigma);
  }
  const Eigen::VectorXd u = matched_direction(model.beta);

  std::vector<double> row(p);
  for (int i = 0; i < n; ++i) {
    sample_design_row(model.design, rng, row.data());
    double mean = 0.0;
    for (int j = 0; j < p; ++j) {
      out.X(i, j) = row[j];
      mean += row[j] * model.beta(j);
    }
    const double flag_prob = lb ? lb->eps_x(row) : eps;
    const bool flagged = rng.uniform() < flag_prob;
    out.inlier_mask[i] = !flagged;
    if (!flagged) {
      out.y(i) = mean + sigma * rng.normal();
      continue;
    }
    out.y(i) = std::visit(
        Overloaded{
            [&](const adversary::None&) { return mean + sigma * rng.normal(); },
            [&](const adversary::PointMass& a) { return a.y0; },
            [&](const adversary::FlipSign&) { return -mean + sigma * rng.normal(); },
            [&](const adversary::ObliviousNoise& a) { return mean + a.Q->sample(rng); },
            [&](const adversary::ObliviousResponse& a) { return a.Q->sample(rng); },
            [&](const adversary::MatchedPair& a) {
              double shift = 0.0;
              for (int j = 0; j < p; ++j) shift += row[j] * u(j);
              const double alt = mean + a.delta * shift;
              const double tv = gaussian_pair_tv(alt - mean, sigma);
              if (tv > eps / (1.0 - eps)) return alt + sigma * rng.normal();
              const double blend = tv / (1.0 + tv);
              if (tv == 0.0 || rng.uniform() >= blend / eps) {
                return mean + sigma * rng.normal();
              }
              return gaussian_excess_density(mean, alt, sigma, kSamplerNodes).sample(rng);
            },
            [&](const adversary::NonuniformLb&) {
              return gaussian_excess_density(mean, -mean, sigma, kSamplerNodes).sample(rng);
            },
            [&](const adversary::SparseAdditive& a) {
              return mean + sigma * rng.normal() + a.magnitude;
            },
            [&](const adversary::HardSq& a) {
              double proj = 0.0;
              for (int j = 0; j < p; ++j) proj += row[j] * a.v(j);
              return a.instance->sample_outlier(proj, rng);
            },
            [&](const adversary::Conditional& a) {
              return a.sample(std::span<const double>(row), rng);
            },
        },
        model.adversary);
  }
  return out;
}

Eigen::VectorXd flip_adversary_moment_check(const ModelSpec& model, int n,
                                            RngStream& rng) {
  if (!std::holds_alternative<adversary::FlipSign>(model.adversary)) {
    throw PreconditionError("flip_adversary_moment_check: requires flip_sign");
  }
  const ContaminatedSample s = generate(model, n, rng);
  return s.X.transpose() * s.y / static_cast<double>(n);
}

NonuniformLb::NonuniformLb(Eigen::VectorXd beta, double sigma, std::size_t nodes)
    : beta_(std::move(beta)), sigma_(sigma), nodes_(nodes) {
  if (beta_.size() == 0 || beta_.norm() == 0.0) {
    throw PreconditionError("build_nonuniform_lb: beta must be nonzero");
  }
  if (!(sigma_ > 0.0)) {
    throw PreconditionError("build_nonuniform_lb: sigma must be positive");
  }
}

double NonuniformLb::tv(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != beta_.size()) {
    throw PreconditionError("nonuniform_lb: covariate dimension mismatch");
  }
  double mean = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) mean += x[j] * beta_(j);
  return gaussian_pair_tv(2.0 * mean, sigma_);
}

double NonuniformLb::eps_x(std::span<const double> x) const {
  const double t = tv(x);
  return t / (1.0 + t);
}

NonuniformLbAt NonuniformLb::at(std::span<const double> x) const {
  const double t = tv(x);
  double mean = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) mean += x[j] * beta_(j);
  const double var = sigma_ * sigma_;
  const double half = std::abs(mean) + 10.0 * sigma_;
  Grid1D grid = Grid1D::uniform(-half, half, nodes_);

  std::vector<double> p(grid.size()), pa(grid.size()), q(grid.size()),
      qa(grid.size()), mix(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double y = grid.nodes()[k];
    p[k] = normal_pdf(y, mean, var);
    pa[k] = normal_pdf(y, -mean, var);
    mix[k] = std::max(p[k], pa[k]) / (1.0 + t);
    q[k] = t > 0.0 ? std::max(pa[k] - p[k], 0.0) / t : p[k];
    qa[k] = t > 0.0 ? std::max(p[k] - pa[k], 0.0) / t : pa[k];
  }
  NonuniformLbAt out;
  out.eps_x = t / (1.0 + t);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double lhs = (1.0 - out.eps_x) * p[k] + out.eps_x * q[k];
    const double rhs = (1.0 - out.eps_x) * pa[k] + out.eps_x * qa[k];
    out.mixture_residual = std::max(
        {out.mixture_residual, std::abs(lhs - mix[k]), std::abs(rhs - mix[k])});
  }
  out.P = TabulatedDensity(grid, std::move(p));
  out.P_alt = TabulatedDensity(grid, std::move(pa));
  out.Qx = TabulatedDensity(grid, std::move(q));
  out.Qx_alt = TabulatedDensity(grid, std::move(qa));
  out.M = TabulatedDensity(std::move(grid), std::move(mix));
  return out;
}

double NonuniformLb::mean_eps() const {
  const double b = beta_.norm();
  const Grid1D g = Grid1D::uniform(-12.0, 12.0, 4001);
  std::vector<double> f(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double z = g.nodes()[k];
    const double t = gaussian_pair_tv(2.0 * b * z, sigma_);
    f[k] = normal_pdf(z) * t / (1.0 + t);
  }
  return integrate_grid(f, g);
}

NonuniformLb build_nonuniform_lb(const Eigen::VectorXd& beta, double sigma) {
  return NonuniformLb(beta, sigma);
}

double huber_pair_max_ratio(double beta_norm, double sigma, const Grid1D& x_grid) {
  if (!(beta_norm > 0.0) || !(sigma > 0.0)) {
    throw PreconditionError("huber_pair_max_ratio: need positive beta norm and sigma");
  }
  const Grid1D g = Grid1D::uniform(-12.0, 12.0, 4001);
  std::vector<double> f(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double z = g.nodes()[k];
    f[k] = normal_pdf(z) * gaussian_pair_tv(2.0 * beta_norm * z, sigma);
  }
  const double mean_tv = integrate_grid(f, g);
  const double eps = mean_tv / (1.0 + mean_tv);
  double worst = 0.0;
  for (double x : x_grid.nodes()) {
    const double tv = gaussian_pair_tv(2.0 * beta_norm * x, sigma);
    const double q_over_phi = tv / mean_tv;
    worst = std::max(worst, eps * q_over_phi);
  }
  return worst;
}

}  // namespace robreg

#include "robreg/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "robreg/errors.hpp"

namespace robreg {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t base_seed, std::uint64_t stream_id)
    : base_seed_(base_seed),
      stream_id_(stream_id),
      engine_(splitmix64(base_seed ^ stream_id)) {}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_pos() {
  return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  const double radius = std::sqrt(-2.0 * std::log(uniform_pos()));
  const double angle = 2.0 * kPi * uniform();
  cached_normal_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

double RngStream::sign() { return (engine_() >> 63) ? 1.0 : -1.0; }

// Marsaglia-Tsang; shape < 1 is boosted to shape + 1.
double RngStream::gamma(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) {
    throw PreconditionError("gamma: shape and scale must be positive");
  }
  if (shape < 1.0) {
    const double g = gamma(shape + 1.0, 1.0);
    return scale * g * std::pow(uniform_pos(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform_pos();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return scale * d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
      return scale * d * v;
    }
  }
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

double normal_pdf(double x, double mean, double var) {
  const double z = x - mean;
  return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * kPi * var);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double sample_gen_gaussian_1d(double gamma, RngStream& rng) {
  if (!(gamma > 0.0)) {
    throw PreconditionError("sample_gen_gaussian_1d: gamma must be positive");
  }
  const double g = rng.gamma(1.0 / gamma, 2.0);
  return rng.sign() * std::pow(g, 1.0 / gamma);
}

Grid1D::Grid1D(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 3) {
    throw PreconditionError("Grid1D: at least 3 nodes required");
  }
  weights_.assign(nodes_.size(), 0.0);
  for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) {
    const double h = nodes_[k + 1] - nodes_[k];
    if (!(h > 0.0)) {
      throw PreconditionError("Grid1D: nodes must be strictly increasing");
    }
    weights_[k] += 0.5 * h;
    weights_[k + 1] += 0.5 * h;
  }
}

Grid1D Grid1D::uniform(double lo, double hi, std::size_t count) {
  if (count < 3 || !(hi > lo)) {
    throw PreconditionError("Grid1D::uniform: need hi > lo and count >= 3");
  }
  std::vector<double> nodes(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) {
    nodes[k] = lo + static_cast<double>(k) * step;
  }
  nodes.back() = hi;
  return Grid1D(std::move(nodes));
}

Grid1D Grid1D::hardness_default(int m, std::size_t count) {
  const double L = std::max(10.0, std::sqrt(32.0 * m) + 2.0);
  return uniform(-L, L, count);
}

double integrate_grid(std::span<const double> f, const Grid1D& grid) {
  if (f.size() != grid.size()) {
    throw PreconditionError("integrate_grid: value count does not match grid");
  }
  const auto& w = grid.weights();
  double total = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) total += w[k] * f[k];
  return total;
}

TabulatedDensity::TabulatedDensity(Grid1D grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw PreconditionError("TabulatedDensity: value count does not match grid");
  }
  for (double& v : values_) {
    if (!(v >= -1e-12)) {
      throw NumericalError("TabulatedDensity: negative density value");
    }
    v = std::max(v, 0.0);
  }
  mass_ = integrate_grid(values_, grid_);
  if (!(mass_ > 0.0)) {
    throw NumericalError("TabulatedDensity: zero total mass");
  }
  const auto& x = grid_.nodes();
  cdf_.assign(values_.size(), 0.0);
  for (std::size_t k = 1; k < values_.size(); ++k) {
    cdf_[k] = cdf_[k - 1] + 0.5 * (x[k] - x[k - 1]) * (values_[k] + values_[k - 1]);
  }
  const double total = cdf_.back();
  for (double& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

bool TabulatedDensity::mass_ok(double tol) const {
  return std::abs(mass_ - 1.0) <= tol;
}

double TabulatedDensity::operator()(double x) const {
  const auto& nodes = grid_.nodes();
  if (x < nodes.front() || x > nodes.back()) return 0.0;
  auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
  if (it == nodes.end()) return values_.back();
  const std::size_t k = static_cast<std::size_t>(it - nodes.begin());
  const double x0 = nodes[k - 1];
  const double x1 = nodes[k];
  const double s = (x - x0) / (x1 - x0);
  return (1.0 - s) * values_[k - 1] + s * values_[k];
}

double TabulatedDensity::quantile(double u) const {
  const auto& nodes = grid_.nodes();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.begin()) return nodes.front();
  if (it == cdf_.end()) return nodes.back();
  const std::size_t k = static_cast<std::size_t>(it - cdf_.begin());
  const double c0 = cdf_[k - 1];
  const double c1 = cdf_[k];
  const double s = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
  return nodes[k - 1] + s * (nodes[k] - nodes[k - 1]);
}

double TabulatedDensity::sample(RngStream& rng) const {
  return quantile(rng.uniform());
}

double weighted_median(std::span<const double> values,
                       std::span<const double> weights) {
  if (values.size() != weights.size()) {
    throw PreconditionError("weighted_median: length mismatch");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) {
      throw PreconditionError("weighted_median: weights must be non-negative");
    }
    total += w;
  }
  if (!(total > 0.0)) {
    throw PreconditionError("weighted_median: all weights are zero");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  const double half = 0.5 * total;
  double acc = 0.0;
  for (std::size_t idx : order) {
    acc += weights[idx];
    if (acc >= half) return values[idx];
  }
  return values[order.back()];
}

}  // namespace robreg

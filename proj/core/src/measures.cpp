#include "mflang/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mflang/error.hpp"

namespace mflang {

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim, std::vector<double> coords)
    : dim_(dim), coords_(std::move(coords)) {
  if (dim_ == 0) throw InputError("empirical measure: dimension must be >= 1");
  if (coords_.empty() || coords_.size() % dim_ != 0)
    throw InputError("empirical measure: need n >= 1 points of dimension " + std::to_string(dim_) + ", got " +
                     std::to_string(coords_.size()) + " coordinates");
  for (std::size_t k = 0; k < coords_.size(); ++k) {
    if (!std::isfinite(coords_[k]))
      throw InputError("empirical measure: non-finite coordinate at point " + std::to_string(k / dim_));
  }
}

GridMeasure1D::GridMeasure1D(double lo, double hi, std::vector<double> density)
    : lo_(lo), hi_(hi), density_(std::move(density)) {
  if (!(lo_ < hi_)) throw InputError("grid measure: need lo < hi");
  if (density_.size() < 3) throw InputError("grid measure: need at least 3 nodes");
  for (std::size_t i = 0; i < density_.size(); ++i) {
    if (!std::isfinite(density_[i])) throw InputError("grid measure: non-finite density at node " + std::to_string(i));
    if (density_[i] < 0.0) throw InputError("grid measure: negative density at node " + std::to_string(i));
  }
}

std::vector<double> GridMeasure1D::nodes() const {
  std::vector<double> xs(size());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = node(i);
  return xs;
}

std::vector<double> GridMeasure1D::trapezoid_weights() const {
  const double h = spacing();
  std::vector<double> w(size(), h);
  w.front() = w.back() = 0.5 * h;
  return w;
}

double GridMeasure1D::mass() const {
  const double h = spacing();
  double sum = 0.5 * (density_.front() + density_.back());
  for (std::size_t i = 1; i + 1 < density_.size(); ++i) sum += density_[i];
  return sum * h;
}

std::vector<double> GridMeasure1D::cdf() const {
  const double h = spacing();
  std::vector<double> F(size(), 0.0);
  for (std::size_t i = 1; i < size(); ++i) F[i] = F[i - 1] + 0.5 * h * (density_[i - 1] + density_[i]);
  return F;
}

double GridMeasure1D::mean() const {
  const auto w = trapezoid_weights();
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    m0 += w[i] * density_[i];
    m1 += w[i] * density_[i] * node(i);
  }
  return m1 / m0;
}

double GridMeasure1D::variance() const {
  const auto w = trapezoid_weights();
  const double mu = mean();
  double m0 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    const double dx = node(i) - mu;
    m0 += w[i] * density_[i];
    m2 += w[i] * density_[i] * dx * dx;
  }
  return m2 / m0;
}

double MeasureView::total_weight() const noexcept {
  if (weights.empty()) return 1.0;
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

WeightedPoints quadrature_points(const GridMeasure1D& g) {
  WeightedPoints q;
  q.dim = 1;
  q.coords = g.nodes();
  q.weights = g.trapezoid_weights();
  for (std::size_t i = 0; i < g.size(); ++i) q.weights[i] *= g.density()[i];
  return q;
}

double second_moment(const EmpiricalMeasure& mu) {
  double sum = 0.0;
  for (double x : mu.coords()) sum += x * x;
  return sum / static_cast<double>(mu.size());
}

EmpiricalMeasure sample_gaussian_cloud(std::size_t n, std::size_t d, std::span<const double> mean, double sd,
                                       RngStream& rng) {
  if (!(sd >= 0.0)) throw InputError("sample_gaussian_cloud: sd must be >= 0");
  if (n == 0 || d == 0) throw InputError("sample_gaussian_cloud: need n >= 1 and d >= 1");
  if (!mean.empty() && mean.size() != d) throw InputError("sample_gaussian_cloud: mean has wrong dimension");
  std::vector<double> coords(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double z = rng.next_normal();
      coords[i * d + k] = (mean.empty() ? 0.0 : mean[k]) + sd * z;
    }
  }
  return EmpiricalMeasure(d, std::move(coords));
}

GridMeasure1D grid_normalize(const GridMeasure1D& g) {
  // The constructor already rejects negative and non-finite nodes.
  const double mass = g.mass();
  if (!(mass > 0.0)) throw InputError("grid_normalize: density is identically zero");
  if (!std::isfinite(mass)) throw InputError("grid_normalize: density mass overflows");
  std::vector<double> scaled(g.density().begin(), g.density().end());
  for (double& v : scaled) v /= mass;
  return GridMeasure1D(g.lo(), g.hi(), std::move(scaled));
}

EmpiricalMeasure quantile_points(const GridMeasure1D& g, std::size_t n) {
  if (n == 0) throw InputError("quantile_points: n must be >= 1");
  const auto F = g.cdf();
  const double total = F.back();
  if (!(total > 0.0)) throw InputError("quantile_points: zero-mass grid");
  std::vector<double> xs(n);
  std::size_t j = 1;
  const double h = g.spacing();
  for (std::size_t i = 0; i < n; ++i) {
    const double u = total * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    while (j + 1 < F.size() && F[j] < u) ++j;
    // Invert the piecewise-quadratic CDF on cell [x_{j-1}, x_j] linearly.
    const double cell = F[j] - F[j - 1];
    const double frac = cell > 0.0 ? std::clamp((u - F[j - 1]) / cell, 0.0, 1.0) : 0.5;
    xs[i] = g.node(j - 1) + frac * h;
  }
  return EmpiricalMeasure::line(std::move(xs));
}

EmpiricalMeasure quantile_points(const EmpiricalMeasure& mu, std::size_t n) {
  if (mu.dim() != 1) throw InputError("quantile_points: cloud must be one-dimensional");
  if (n == 0) throw InputError("quantile_points: n must be >= 1");
  std::vector<double> sorted(mu.coords().begin(), mu.coords().end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    xs[i] = sorted[std::min(m - 1, static_cast<std::size_t>(u * static_cast<double>(m)))];
  }
  return EmpiricalMeasure::line(std::move(xs));
}

}  // namespace mflang

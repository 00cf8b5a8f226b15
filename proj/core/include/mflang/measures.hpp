#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mflang/rng.hpp"

namespace mflang {

/// n uniformly weighted points in R^d, stored row-major (point i occupies
/// coords[i*d, (i+1)*d)). Immutable after construction.
class EmpiricalMeasure {
 public:
  /// Throws InputError if n == 0, d == 0, the size is inconsistent or a
  /// coordinate is not finite.
  EmpiricalMeasure(std::size_t dim, std::vector<double> coords);

  /// Convenience for 1D clouds.
  static EmpiricalMeasure line(std::vector<double> xs) { return EmpiricalMeasure(1, std::move(xs)); }

  std::size_t size() const noexcept { return coords_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> coords() const noexcept { return coords_; }
  std::span<const double> point(std::size_t i) const noexcept { return {coords_.data() + i * dim_, dim_}; }

  template <class F>
  double integrate(F&& f) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < size(); ++i) sum += f(point(i));
    return sum / static_cast<double>(size());
  }

  friend bool operator==(const EmpiricalMeasure&, const EmpiricalMeasure&) = default;

 private:
  std::size_t dim_;
  std::vector<double> coords_;
};

/// Density samples on the uniform grid lo = x_0 < ... < x_{m-1} = hi.
class GridMeasure1D {
 public:
  /// Throws InputError unless lo < hi, m >= 3 and every density value is
  /// finite and nonnegative. The density need not be normalized.
  GridMeasure1D(double lo, double hi, std::vector<double> density);

  /// Samples `density(x)` at the nodes of [lo, hi] with m nodes.
  template <class F>
  static GridMeasure1D sample(double lo, double hi, std::size_t m, F&& density) {
    std::vector<double> values(m);
    const double h = (hi - lo) / static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i) values[i] = density(lo + h * static_cast<double>(i));
    return GridMeasure1D(lo, hi, std::move(values));
  }

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  std::size_t size() const noexcept { return density_.size(); }
  double spacing() const noexcept { return (hi_ - lo_) / static_cast<double>(density_.size() - 1); }
  double node(std::size_t i) const noexcept { return lo_ + spacing() * static_cast<double>(i); }
  std::vector<double> nodes() const;
  std::span<const double> density() const noexcept { return density_; }

  /// Trapezoid weights h/2, h, ..., h, h/2.
  std::vector<double> trapezoid_weights() const;
  /// Trapezoid integral of the density.
  double mass() const;
  /// Cumulative trapezoid integral F(x_i), F(x_0) = 0.
  std::vector<double> cdf() const;
  /// Mean and variance of the density (trapezoid, normalized by mass).
  double mean() const;
  double variance() const;

  bool same_grid(const GridMeasure1D& other) const noexcept {
    return lo_ == other.lo_ && hi_ == other.hi_ && size() == other.size();
  }

 private:
  double lo_;
  double hi_;
  std::vector<double> density_;
};

/// Weighted point view used for quadrature against a measure: uniform
/// weights for empirical clouds, trapezoid weights times density for grids,
/// convex combinations for interpolated measures. Non-owning.
struct MeasureView {
  std::size_t dim = 1;
  std::span<const double> coords;
  std::span<const double> weights;  // empty means uniform 1/n

  std::size_t size() const noexcept { return coords.size() / dim; }
  std::span<const double> point(std::size_t i) const noexcept { return {coords.data() + i * dim, dim}; }
  double weight(std::size_t i) const noexcept {
    return weights.empty() ? 1.0 / static_cast<double>(size()) : weights[i];
  }
  double total_weight() const noexcept;
};

inline MeasureView view(const EmpiricalMeasure& mu) noexcept { return {mu.dim(), mu.coords(), {}}; }

/// Owning weighted point set, e.g. the quadrature form of a grid measure.
struct WeightedPoints {
  std::size_t dim = 1;
  std::vector<double> coords;
  std::vector<double> weights;

  MeasureView view() const noexcept { return {dim, coords, weights}; }
};

WeightedPoints quadrature_points(const GridMeasure1D& g);

/// (1/n) Σ ‖x_i‖².
double second_moment(const EmpiricalMeasure& mu);

/// n i.i.d. draws from N(mean, sd² I_d). `mean` must have d entries (or be
/// empty for the origin). Throws InputError on sd < 0 or n == 0.
EmpiricalMeasure sample_gaussian_cloud(std::size_t n, std::size_t d, std::span<const double> mean, double sd,
                                       RngStream& rng);

/// Rescales the density to unit trapezoid mass. Throws InputError naming
/// the first offending node on non-finite or negative entries, or if the
/// density is identically zero.
GridMeasure1D grid_normalize(const GridMeasure1D& g);

/// n points at the (i + 1/2)/n quantiles of the grid CDF (piecewise linear
/// inverse). Quantization error is O(1/n).
EmpiricalMeasure quantile_points(const GridMeasure1D& g, std::size_t n);

/// n points at the (i + 1/2)/n empirical quantiles of a 1D cloud.
EmpiricalMeasure quantile_points(const EmpiricalMeasure& mu, std::size_t n);

}  // namespace mflang

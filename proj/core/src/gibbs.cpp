#include "mflang/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "mflang/error.hpp"
#include "mflang/io.hpp"
#include "mflang/wasserstein.hpp"

namespace mflang {

GridMeasure1D gibbs_map(const EnergySpec& spec, const GridMeasure1D& mu) {
  const GridMeasure1D unit = grid_normalize(mu);
  const WeightedPoints q = quadrature_points(unit);
  const EnergyAt at(spec, q.view());

  const std::size_t m = unit.size();
  std::vector<double> phi(m);
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    const double x = unit.node(i);
    phi[i] = at.flat_derivative(std::span<const double>(&x, 1));
    if (std::isnan(phi[i]) || phi[i] == -std::numeric_limits<double>::infinity())
      throw GibbsError("gibbs_map: flat derivative unbounded below at node " + std::to_string(i));
    lowest = std::min(lowest, phi[i]);
  }
  std::vector<double> rho(m);
  for (std::size_t i = 0; i < m; ++i) {
    rho[i] = std::exp(-(phi[i] - lowest));
    if (!std::isfinite(rho[i])) throw GibbsError("gibbs_map: overflow at node " + std::to_string(i));
  }

  GridMeasure1D out = grid_normalize(GridMeasure1D(unit.lo(), unit.hi(), std::move(rho)));
  const double h = out.spacing();
  const double left = 0.5 * h * out.density().front();
  const double right = 0.5 * h * out.density().back();
  if (left > kBoundaryMassLimit || right > kBoundaryMassLimit) {
    std::ostringstream msg;
    msg << "gibbs_map: boundary mass " << std::max(left, right) << " exceeds " << kBoundaryMassLimit
        << "; widen the domain [" << out.lo() << ", " << out.hi() << "]";
    throw GibbsError(msg.str());
  }
  return out;
}

PicardHistory picard_iterate(const EnergySpec& spec, const GridMeasure1D& mu0, double tol, std::size_t max_iter) {
  if (!(tol > 0.0)) throw InputError("picard_iterate: tol must be > 0");
  PicardHistory h;
  h.iterates.push_back(grid_normalize(mu0));
  for (std::size_t k = 0; k < max_iter; ++k) {
    h.iterates.push_back(gibbs_map(spec, h.iterates.back()));
    const auto& last = h.iterates[h.iterates.size() - 1];
    const auto& prev = h.iterates[h.iterates.size() - 2];
    h.step_distances.push_back(w1_grid(last, prev));
    const std::size_t s = h.step_distances.size();
    if (s >= 2) {
      const double denom = h.step_distances[s - 2];
      h.ratio_estimates.push_back(denom > 0.0 ? h.step_distances[s - 1] / denom : 0.0);
    }
    if (h.step_distances.back() < tol) {
      h.converged = true;
      break;
    }
  }
  return h;
}

double contraction_ratio(const EnergySpec& spec, const GridMeasure1D& mu, const GridMeasure1D& nu) {
  const double base = w1_grid(mu, nu);
  if (!(base > 0.0)) throw InputError("contraction_ratio: W1(mu, nu) is zero");
  return w1_grid(gibbs_map(spec, mu), gibbs_map(spec, nu)) / base;
}

double stationarity_residual(const EnergySpec& spec, const GridMeasure1D& mu) {
  const GridMeasure1D unit = grid_normalize(mu);
  const WeightedPoints q = quadrature_points(unit);
  const EnergyAt at(spec, q.view());
  const double h = unit.spacing();
  const auto rho = unit.density();
  double worst = 0.0;
  double grad = 0.0;
  for (std::size_t i = 1; i + 1 < unit.size(); ++i) {
    const double x = unit.node(i);
    const double dlog =
        (std::log(std::max(rho[i + 1], kDensityFloor)) - std::log(std::max(rho[i - 1], kDensityFloor))) / (2.0 * h);
    at.intrinsic_derivative(std::span<const double>(&x, 1), std::span<double>(&grad, 1));
    worst = std::max(worst, std::abs(dlog + grad));
  }
  return worst;
}

double n_particle_gibbs_logdensity(const EnergySpec& spec, const EmpiricalMeasure& x) {
  return -static_cast<double>(x.size()) * energy_value(spec, x);
}

void write_picard_csv(const PicardHistory& history, const std::filesystem::path& path) {
  std::string body = "iter,step_w1,ratio\n";
  for (std::size_t k = 0; k < history.step_distances.size(); ++k) {
    body += std::to_string(k + 1);
    body += ',';
    body += format_double(history.step_distances[k]);
    body += ',';
    if (k > 0) body += format_double(history.ratio_estimates[k - 1]);
    body += '\n';
  }
  write_file_atomic(path, body);
}

}  // namespace mflang

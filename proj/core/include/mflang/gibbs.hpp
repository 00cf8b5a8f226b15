#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "mflang/energy.hpp"
#include "mflang/measures.hpp"

namespace mflang {

/// Boundary cells holding more than this mass make gibbs_map throw.
inline constexpr double kBoundaryMassLimit = 1e-6;
/// Floor applied to densities before taking logarithms.
inline constexpr double kDensityFloor = 1e-300;

/// Φ(μ) ∝ exp(−δH/δm(μ, ·)) on μ's grid. μ is normalized before use. The
/// flat derivative is shifted by its nodal minimum before exponentiating.
/// Throws GibbsError on overflow or when a boundary cell carries more than
/// kBoundaryMassLimit of the output mass.
GridMeasure1D gibbs_map(const EnergySpec& spec, const GridMeasure1D& mu);

struct PicardHistory {
  std::vector<GridMeasure1D> iterates;  // μ_0, μ_1, ...
  std::vector<double> step_distances;   // W₁(μ_{k+1}, μ_k)
  std::vector<double> ratio_estimates;  // step[k+1] / step[k]
  bool converged = false;
};

/// μ_{k+1} = Φ(μ_k) until the step W₁ drops below tol or max_iter maps
/// have been applied. Non-convergence is reported, not thrown.
PicardHistory picard_iterate(const EnergySpec& spec, const GridMeasure1D& mu0, double tol, std::size_t max_iter);

/// W₁(Φμ, Φν) / W₁(μ, ν). Throws InputError if W₁(μ, ν) = 0.
double contraction_ratio(const EnergySpec& spec, const GridMeasure1D& mu, const GridMeasure1D& nu);

/// max over interior nodes of |(ln ρ)'(x) + D_mH(μ, x)|, centered differences.
double stationarity_residual(const EnergySpec& spec, const GridMeasure1D& mu);

/// −n·H(μ_x), the unnormalized log-density of the n-particle Gibbs measure.
double n_particle_gibbs_logdensity(const EnergySpec& spec, const EmpiricalMeasure& x);

/// CSV with header iter,step_w1,ratio. Ratio is empty on the first row.
void write_picard_csv(const PicardHistory& history, const std::filesystem::path& path);

}  // namespace mflang

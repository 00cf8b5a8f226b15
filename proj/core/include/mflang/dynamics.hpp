#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mflang/energy.hpp"
#include "mflang/measures.hpp"

namespace mflang {

/// Any coordinate beyond this magnitude aborts a run.
inline constexpr double kDivergenceLimit = 1e8;

struct OverdampedState {
  double t = 0.0;
  EmpiricalMeasure cloud;
};

struct KineticState {
  double t = 0.0;
  EmpiricalMeasure positions;
  EmpiricalMeasure velocities;
};

/// Q_{a,b}(p, v) = a|p|² + 2p·v + b|v|².
struct QuadraticForm {
  double a = 1.0;
  double b = 1.0;

  bool positive_definite() const noexcept { return a > 0.0 && a * b > 1.0; }
  double operator()(std::span<const double> p, std::span<const double> v) const noexcept;
  /// Eigenvalues of [[a, 1], [1, b]].
  double min_eigenvalue() const noexcept;
  double max_eigenvalue() const noexcept;
};

/// Isotropic Gaussian law N(mean, sd² I).
struct GaussianLaw {
  std::vector<double> mean;  // d entries
  double sd = 1.0;

  std::size_t dim() const noexcept { return mean.size(); }
  double second_moment() const noexcept;
};

/// Euler–Maruyama step X ← X − D_mH(μ_X, X)dt + √(2dt)ξ with the drift
/// frozen at the pre-step cloud. `noise` holds n·d standard normals.
/// Throws DivergenceError (carrying step_index) on a non-finite or
/// runaway coordinate.
OverdampedState step_overdamped(const OverdampedState& state, const EnergySpec& spec, double dt,
                                std::span<const double> noise, std::size_t step_index = 0);

/// P ← P + V dt, V ← V − [A(V) + λ_B P + D(P) + D_mH(μ_P, P)]dt + √(2dt)ξ,
/// both from pre-step values.
KineticState step_kinetic(const KineticState& state, const KineticFields& fields, const EnergySpec& spec, double dt,
                          std::span<const double> noise, std::size_t step_index = 0);

/// In-place kernels behind the step functions. `out` may not alias the input.
void overdamped_update(const EnergySpec& spec, std::size_t dim, std::span<const double> x, double dt,
                       std::span<const double> noise, std::span<double> out, std::size_t step_index);
void kinetic_update(const KineticFields& fields, const EnergySpec& spec, std::size_t dim, std::span<const double> p,
                    std::span<const double> v, double dt, std::span<const double> noise, std::span<double> p_out,
                    std::span<double> v_out, std::size_t step_index);

/// Recorded series of a coupled run. For one replica the *_se columns are
/// zero; average_traces fills them with standard errors over replicas.
/// mean_sq_dist is E‖X − Y‖² (kinetic: E[|p|² + |v|²] of the difference);
/// second moments are E‖·‖² (kinetic: positions plus velocities).
struct CouplingTrace {
  std::vector<double> times;
  std::vector<double> mean_sq_dist;
  std::vector<double> mean_sq_dist_se;
  std::vector<double> second_moment_a;
  std::vector<double> second_moment_a_se;
  std::vector<double> second_moment_b;
  std::vector<double> second_moment_b_se;
  std::vector<double> q_form;  // kinetic only
  std::vector<double> law_moment;  // PoC only: second moment of the nonlinear-law stand-in
  std::vector<double> w2_sq;   // optional W₂² column, NaN where not recorded

  std::size_t size() const noexcept { return times.size(); }
};

/// Time grid and recording policy shared by all simulators.
struct RunOptions {
  double dt = 1e-3;
  double horizon = 1.0;
  double record_every = 0.01;
  std::uint64_t seed = 0;
  /// Record W₂² every this many records (0 = never). d = 1 uses sorting
  /// on the full clouds; d > 1 uses assignment on the first w2_subsample
  /// particles of each cloud.
  std::size_t w2_every = 0;
  std::size_t w2_subsample = 256;

  std::size_t steps() const;
  std::size_t record_stride() const;
};

/// Synchronous coupling: both systems receive the same noise array each step,
/// drawn from streams (seed, stream_id(replica, kParticles, i)).
CouplingTrace simulate_coupled_overdamped(const OverdampedState& init_a, const OverdampedState& init_b,
                                          const EnergySpec& spec, const RunOptions& opt, std::uint32_t replica = 0);

/// Size of the reference system standing in for the nonlinear law.
std::size_t reference_size(std::size_t n);

/// n-particle system against n independent copies of the nonlinear
/// process driven by the same per-index noise. The nonlinear law is a
/// reference system of reference_size(n) particles on independent streams,
/// or the exact Euler–Maruyama mean recursion for the linear-quadratic
/// family. mean_sq_dist is the index-averaged gap, second_moment_a/b the
/// moments of the particle system / the copies, w2_sq is W₂²(copies, law)
/// with the law quantized to n points.
CouplingTrace simulate_poc_overdamped(std::size_t n, const EnergySpec& spec, const GaussianLaw& init,
                                      const RunOptions& opt, std::uint32_t replica = 0, bool closed_form = true);

CouplingTrace simulate_coupled_kinetic(const KineticState& init_a, const KineticState& init_b,
                                       const KineticFields& fields, const EnergySpec& spec, const RunOptions& opt,
                                       const QuadraticForm& q, std::uint32_t replica = 0);

/// Kinetic analogue of simulate_poc_overdamped (reference system only).
CouplingTrace simulate_poc_kinetic(std::size_t n, const KineticFields& fields, const EnergySpec& spec,
                                   const GaussianLaw& init_p, const GaussianLaw& init_v, const RunOptions& opt,
                                   std::uint32_t replica = 0);

/// Replica mean and standard error of every column.
CouplingTrace average_traces(std::span<const CouplingTrace> traces);

struct MomentBoundReport {
  std::vector<double> times;
  std::vector<double> bound;     // for column a: m0 e^{βt} + (α/β)(e^{βt} − 1), or m0 + αt
  std::vector<double> margin_a;  // bound + 3·SE − moment
  std::vector<double> margin_b;
  double stationary_bound = 0.0;  // m0 − α/β when β < 0, else +inf
  bool ok = true;
};

/// Checks the Gronwall second-moment bound on both moment columns; m0 is
/// the recorded moment at t = 0.
MomentBoundReport second_moment_bound_check(const CouplingTrace& trace, double alpha, double beta);

}  // namespace mflang

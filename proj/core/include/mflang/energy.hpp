#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mflang/measures.hpp"
#include "mflang/potentials.hpp"

namespace mflang {

/// Constants an energy is declared to satisfy. They are inputs, checked by
/// sampling in check_assumptions, never derived symbolically.
struct DeclaredConstants {
  double lambda = 0.0;        // convexity constant λ
  double d2m_bound = 0.0;     // ‖D²_m H‖_{op,∞}
  double dm_lip = 0.0;        // [D_m H]_{1,∞}
  double grad_at_zero = 0.0;  // sup_μ ‖∇ δH/δm(μ, 0)‖

  friend bool operator==(const DeclaredConstants&, const DeclaredConstants&) = default;
};

/// H(μ) = ∫V dμ + ½∫∫W(x − y) μ(dx)μ(dy), W even.
struct TwoBody {
  ScalarField confinement;
  ScalarField interaction;
};

/// H(μ) = ∫V dμ + Σ_k ∫W^(k) dμ^{⊗k}, each W^(k) symmetric.
struct Polynomial {
  ScalarField confinement;
  std::vector<KBodyPotential> interactions;
};

/// H(μ) = ψ(⟨μ, W⟩).
struct Internal {
  ScalarFunction psi;
  ScalarField field;
};

using EnergyFamily = std::variant<TwoBody, Polynomial, Internal>;

/// Coefficients of the linear-quadratic two-body model
/// V(x) = a_v|x|² + b_v·Σx_k + c, W(z) = a_w|z|² + c'.
struct LinearQuadratic {
  double a_v = 0.0;
  double b_v = 0.0;
  double a_w = 0.0;
};

class EnergySpec {
 public:
  /// Validates evenness of two-body interactions (sampled) and that the
  /// declared constants are nonnegative; throws InputError otherwise.
  EnergySpec(EnergyFamily family, DeclaredConstants constants = {});

  const EnergyFamily& family() const noexcept { return family_; }
  const DeclaredConstants& constants() const noexcept { return constants_; }
  std::string family_name() const;

  /// True when Assumption-2 style contraction is declared: λ > ‖D²_m H‖.
  bool declares_contraction() const noexcept { return constants_.lambda > constants_.d2m_bound; }

  /// Set when the energy is two-body with polynomial V of degree <= 2 and
  /// W = a_w|z|² + const; its mean-field limit is Gaussian-closed.
  std::optional<LinearQuadratic> linear_quadratic() const;

  /// True when δH/δm does not depend on μ.
  bool interaction_free() const;

 private:
  EnergyFamily family_;
  DeclaredConstants constants_;
};

/// An energy frozen at one measure. Construction precomputes every
/// measure-dependent summary (convolution moments, ⟨μ,W⟩, k-body tuple
/// sets), after which all queries are O(1) in n for catalog potentials.
/// The measure view must outlive this object.
class EnergyAt {
 public:
  /// k-fold integrals switch from full summation to Monte-Carlo
  /// subsampling above this many index tuples.
  static constexpr double kExhaustiveTupleLimit = 1e7;
  static constexpr std::size_t kMonteCarloTuples = 1u << 16;

  EnergyAt(const EnergySpec& spec, MeasureView mu);
  ~EnergyAt();
  EnergyAt(EnergyAt&&) noexcept;
  EnergyAt& operator=(EnergyAt&&) = delete;
  EnergyAt(const EnergyAt&) = delete;
  EnergyAt& operator=(const EnergyAt&) = delete;

  std::size_t dim() const noexcept { return mu_.dim; }

  /// δH/δm(μ, x).
  double flat_derivative(std::span<const double> x) const;
  /// D_m H(μ, x) = ∇_x δH/δm(μ, x), written to out.
  void intrinsic_derivative(std::span<const double> x, std::span<double> out) const;
  /// out += scale·D_m H(μ, x)
  void add_intrinsic_derivative(std::span<const double> x, double scale, std::span<double> out) const;
  /// ∇_x D_m H(μ, x).
  Eigen::MatrixXd intrinsic_jacobian(std::span<const double> x) const;
  /// D²_m H(μ, x, y) = ∇²_{x,y} δ²H/δm²(μ, x, y).
  Eigen::MatrixXd second_intrinsic(std::span<const double> x, std::span<const double> y) const;
  /// H(μ), diagonal terms included.
  double energy() const;

  /// True if some k-body term uses the Monte-Carlo fallback.
  bool subsampled() const noexcept;

 private:
  struct Impl;
  const EnergySpec* spec_;
  MeasureView mu_;
  std::unique_ptr<Impl> impl_;
};

double flat_derivative(const EnergySpec& spec, MeasureView mu, std::span<const double> x);
double flat_derivative(const EnergySpec& spec, const EmpiricalMeasure& mu, std::span<const double> x);
double flat_derivative(const EnergySpec& spec, const GridMeasure1D& mu, std::span<const double> x);

double energy_value(const EnergySpec& spec, MeasureView mu);
double energy_value(const EnergySpec& spec, const EmpiricalMeasure& mu);

std::vector<double> intrinsic_derivative(const EnergySpec& spec, MeasureView mu, std::span<const double> x);
std::vector<double> intrinsic_derivative(const EnergySpec& spec, const EmpiricalMeasure& mu, std::span<const double> x);
std::vector<double> intrinsic_derivative(const EnergySpec& spec, const GridMeasure1D& mu, std::span<const double> x);

Eigen::MatrixXd second_intrinsic_apply(const EnergySpec& spec, MeasureView mu, std::span<const double> x,
                                       std::span<const double> y);
Eigen::MatrixXd second_intrinsic_apply(const EnergySpec& spec, const EmpiricalMeasure& mu, std::span<const double> x,
                                       std::span<const double> y);

/// Largest singular value.
double operator_norm(const Eigen::MatrixXd& m);

/// Worst-case margins of the declared constants over the samples. A
/// negative margin flags a violation; the check never throws on one.
struct AssumptionReport {
  double monotonicity_min = 0.0;     // min ⟨D_mH(μ,x) − D_mH(μ,y), x − y⟩ / ‖x − y‖²
  double monotonicity_margin = 0.0;  // monotonicity_min − λ
  double d2m_max = 0.0;              // max ‖D²_m H(μ,x,y)‖
  double d2m_margin = 0.0;           // declared bound − d2m_max
  double dm_lip_max = 0.0;           // max ‖D_mH(μ,x) − D_mH(μ,y)‖ / ‖x − y‖
  double dm_lip_margin = 0.0;        // declared [D_mH]_1 − dm_lip_max
  double jacobian_min_eig = 0.0;     // sampled λ̲
  double grad_at_zero_max = 0.0;     // max ‖D_mH(μ, 0)‖
  double grad_at_zero_margin = 0.0;
  std::size_t pairs_checked = 0;
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
};

/// Checks the declared constants on every pair of `sample_points` against
/// every measure in `sample_measures`. Margins below −tolerance are
/// reported as violations.
AssumptionReport check_assumptions(const EnergySpec& spec, const EmpiricalMeasure& sample_points,
                                   std::span<const EmpiricalMeasure> sample_measures, double tolerance = 1e-12);

/// Friction A, confinement B(p) = λ_B p + D(p) and their declared
/// constants [A]_1, λ_A, [D]_1.
struct KineticFields {
  VectorField friction = VectorField::linear(1.0);
  double lambda_b = 1.0;
  VectorField perturbation = VectorField::zero();
  double lip_a = 1.0;
  double mono_a = 1.0;
  double lip_d = 0.0;

  /// Throws InputError on negative constants.
  void validate() const;
};

struct KineticFieldReport {
  double mono_a_min = 0.0;   // min ⟨A(v) − A(w), v − w⟩ / |v − w|²
  double mono_a_margin = 0.0;
  double lip_a_max = 0.0;
  double lip_a_margin = 0.0;
  double lip_d_max = 0.0;
  double lip_d_margin = 0.0;
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
};

KineticFieldReport check_kinetic_fields(const KineticFields& fields, const EmpiricalMeasure& sample_points,
                                        double tolerance = 1e-12);

}  // namespace mflang

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mflang/measures.hpp"

namespace mflang {

/// A C² potential R^d -> R with exact gradient and Hessian.
///
/// Catalog members act coordinate-wise (or radially for the Gaussian well)
/// so one object serves every dimension:
///   quadratic(a,b,c)        a|x|² + b·Σx_k + c
///   quartic(a,b,c,d,e)      Σ_k (a x_k⁴ + b x_k³ + c x_k² + d x_k) + e
///   cosine(eps, freq)       eps·Σ_k cos(freq·x_k)
///   gaussian_well(depth,w)  −depth·exp(−|x|²/(2w²))
class ScalarField {
 public:
  enum class Kind { kZero, kPolynomial, kCosine, kGaussianWell, kCustom };

  using ValueFn = std::function<double(std::span<const double>)>;
  using GradientFn = std::function<void(std::span<const double>, std::span<double>)>;
  using HessianFn = std::function<void(std::span<const double>, Eigen::Ref<Eigen::MatrixXd>)>;

  static ScalarField zero();
  static ScalarField quadratic(double a, double b, double c);
  static ScalarField quartic(double a, double b, double c, double d, double e);
  static ScalarField cosine(double amplitude, double frequency);
  static ScalarField gaussian_well(double depth, double width);
  static ScalarField custom(std::string name, ValueFn value, GradientFn gradient, HessianFn hessian);

  double value(std::span<const double> x) const;
  void gradient(std::span<const double> x, std::span<double> out) const;
  void hessian(std::span<const double> x, Eigen::Ref<Eigen::MatrixXd> out) const;
  Eigen::MatrixXd hessian(std::span<const double> x) const;

  Kind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  /// Catalog parameters in declaration order (empty for custom fields).
  const std::vector<double>& params() const noexcept { return params_; }
  bool is_zero() const noexcept { return kind_ == Kind::kZero; }

  /// Per-coordinate polynomial coefficients c_1..c_4 (z, z², z³, z⁴) and the
  /// additive constant, for kPolynomial fields.
  const std::array<double, 5>& poly() const noexcept { return poly_; }
  double amplitude() const noexcept { return amplitude_; }
  double frequency() const noexcept { return frequency_; }

 private:
  ScalarField() = default;

  Kind kind_ = Kind::kZero;
  std::string name_ = "zero";
  std::vector<double> params_;
  std::array<double, 5> poly_{};  // [constant, c1, c2, c3, c4]
  double amplitude_ = 0.0;
  double frequency_ = 0.0;
  std::shared_ptr<const ValueFn> value_fn_;
  std::shared_ptr<const GradientFn> gradient_fn_;
  std::shared_ptr<const HessianFn> hessian_fn_;
};

/// x ↦ ∫ W(x − y) μ(dy) against a weighted point set. Polynomial and cosine
/// fields reduce to a few moments of μ (O(n) to prepare, O(d) per query);
/// other fields fall back to direct summation (O(n) per query). The view
/// must outlive this object when the direct path is used.
class Convolution {
 public:
  Convolution(const ScalarField& field, MeasureView mu);

  double value(std::span<const double> x) const;
  /// out = ∇(W∗μ)(x)
  void gradient(std::span<const double> x, std::span<double> out) const;
  /// out += scale·∇(W∗μ)(x)
  void add_gradient(std::span<const double> x, double scale, std::span<double> out) const;
  Eigen::MatrixXd hessian(std::span<const double> x) const;
  /// ∫∫ W(y − y') μ(dy) μ(dy').
  double self_energy() const;

  bool uses_moments() const noexcept { return moments_; }

 private:
  ScalarField field_;
  MeasureView mu_;
  std::size_t dim_;
  double mass_ = 1.0;
  bool moments_ = false;
  // kPolynomial: raw moments Σ w y_k^q, q = 0..4, per coordinate (row-major dim x 5).
  // kCosine: Σ w cos(ω y_k), Σ w sin(ω y_k) per coordinate (dim x 2).
  std::vector<double> summary_;
};

/// Scalar C² function ψ: R -> R for the internal-energy family.
class ScalarFunction {
 public:
  using Fn = std::function<double(double)>;

  /// ψ(t) = Σ_j coeffs[j]·t^j.
  static ScalarFunction polynomial(std::vector<double> coeffs);
  static ScalarFunction identity() { return polynomial({0.0, 1.0}); }
  static ScalarFunction custom(std::string name, Fn value, Fn first, Fn second);

  double value(double t) const { return (*value_)(t); }
  double first(double t) const { return (*first_)(t); }
  double second(double t) const { return (*second_)(t); }
  const std::string& name() const noexcept { return name_; }
  const std::vector<double>& coeffs() const noexcept { return coeffs_; }

 private:
  ScalarFunction() = default;

  std::string name_;
  std::vector<double> coeffs_;
  std::shared_ptr<const Fn> value_;
  std::shared_ptr<const Fn> first_;
  std::shared_ptr<const Fn> second_;
};

/// Vector field R^d -> R^d for the kinetic friction A and the
/// bounded-Lipschitz confinement part D. The catalog member acts
/// coordinate-wise: f(v)_k = linear·v_k + amplitude·sin(frequency·v_k).
class VectorField {
 public:
  using Fn = std::function<void(std::span<const double>, std::span<double>)>;

  static VectorField zero() { return linear_sine(0.0, 0.0, 0.0); }
  static VectorField linear(double slope) { return linear_sine(slope, 0.0, 0.0); }
  static VectorField linear_sine(double slope, double amplitude, double frequency);
  static VectorField custom(std::string name, Fn fn);

  void apply(std::span<const double> v, std::span<double> out) const;
  /// out += scale·f(v)
  void add(std::span<const double> v, double scale, std::span<double> out) const;

  bool is_catalog() const noexcept { return !fn_; }
  bool is_linear() const noexcept { return is_catalog() && amplitude_ == 0.0; }
  bool is_zero() const noexcept { return is_linear() && slope_ == 0.0; }
  double slope() const noexcept { return slope_; }
  double amplitude() const noexcept { return amplitude_; }
  double frequency() const noexcept { return frequency_; }
  const std::string& name() const noexcept { return name_; }

 private:
  VectorField() = default;

  std::string name_;
  double slope_ = 0.0;
  double amplitude_ = 0.0;
  double frequency_ = 0.0;
  std::shared_ptr<const Fn> fn_;
};

/// Symmetric k-body interaction potential W^(k)(x_1, ..., x_k) on (R^d)^k.
/// Points are passed flattened (k·d entries).
class KBodyPotential {
 public:
  using ValueFn = std::function<double(std::span<const double>, std::size_t dim)>;
  using GradientFn = std::function<void(std::span<const double>, std::size_t dim, std::span<double>)>;
  using HessianFn = std::function<void(std::span<const double>, std::size_t dim, Eigen::Ref<Eigen::MatrixXd>)>;

  /// coef·Σ_{i<j} w(x_i − x_j) with w even. Integrals against product
  /// measures reduce to convolutions of w.
  static KBodyPotential pairwise_sum(int order, double coef, ScalarField pair);

  /// Arbitrary symmetric potential: value, ∇_{x_1}, ∇²_{x_1 x_1} and
  /// ∇²_{x_1 x_2}. Integrals use full k-fold summation.
  static KBodyPotential custom(int order, std::string name, ValueFn value, GradientFn grad_first,
                               HessianFn hess_first, HessianFn cross_hess);

  int order() const noexcept { return order_; }
  bool is_pairwise() const noexcept { return pairwise_; }
  double coef() const noexcept { return coef_; }
  const ScalarField& pair() const noexcept { return pair_; }
  const std::string& name() const noexcept { return name_; }

  double value(std::span<const double> pts, std::size_t dim) const;
  void grad_first(std::span<const double> pts, std::size_t dim, std::span<double> out) const;
  void hess_first(std::span<const double> pts, std::size_t dim, Eigen::Ref<Eigen::MatrixXd> out) const;
  void cross_hess(std::span<const double> pts, std::size_t dim, Eigen::Ref<Eigen::MatrixXd> out) const;

 private:
  KBodyPotential() : pair_(ScalarField::zero()) {}

  int order_ = 2;
  bool pairwise_ = false;
  double coef_ = 0.0;
  ScalarField pair_;
  std::string name_;
  std::shared_ptr<const ValueFn> value_;
  std::shared_ptr<const GradientFn> grad_first_;
  std::shared_ptr<const HessianFn> hess_first_;
  std::shared_ptr<const HessianFn> cross_hess_;
};

}  // namespace mflang

#include "mflang/potentials.hpp"

#include <cmath>

#include "mflang/error.hpp"

namespace mflang {

namespace {

constexpr double kBinomial[5][5] = {
    {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};

double horner(const std::array<double, 5>& c, double z) {
  return (((c[4] * z + c[3]) * z + c[2]) * z + c[1]) * z + c[0];
}

// ∫ P(x − y) μ(dy) for P(z) = Σ_j c_j z^j given raw moments m_q = Σ w y^q.
double convolve_poly(const std::array<double, 5>& c, double x, const double* m) {
  double xp[5] = {1.0, x, x * x, x * x * x, x * x * x * x};
  double total = 0.0;
  for (int j = 0; j <= 4; ++j) {
    if (c[j] == 0.0) continue;
    double term = 0.0;
    for (int q = 0; q <= j; ++q) term += kBinomial[j][q] * xp[j - q] * ((q % 2) ? -m[q] : m[q]);
    total += c[j] * term;
  }
  return total;
}

std::array<double, 5> derivative(const std::array<double, 5>& c) {
  return {c[1], 2.0 * c[2], 3.0 * c[3], 4.0 * c[4], 0.0};
}

}  // namespace

ScalarField ScalarField::zero() { return ScalarField(); }

ScalarField ScalarField::quadratic(double a, double b, double c) {
  ScalarField f;
  f.kind_ = Kind::kPolynomial;
  f.name_ = "quadratic";
  f.params_ = {a, b, c};
  f.poly_ = {c, b, a, 0.0, 0.0};
  return f;
}

ScalarField ScalarField::quartic(double a, double b, double c, double d, double e) {
  ScalarField f;
  f.kind_ = Kind::kPolynomial;
  f.name_ = "quartic";
  f.params_ = {a, b, c, d, e};
  f.poly_ = {e, d, c, b, a};
  return f;
}

ScalarField ScalarField::cosine(double amplitude, double frequency) {
  ScalarField f;
  f.kind_ = Kind::kCosine;
  f.name_ = "cosine";
  f.params_ = {amplitude, frequency};
  f.amplitude_ = amplitude;
  f.frequency_ = frequency;
  return f;
}

ScalarField ScalarField::gaussian_well(double depth, double width) {
  if (!(width > 0.0)) throw InputError("gaussian-well: width must be > 0");
  ScalarField f;
  f.kind_ = Kind::kGaussianWell;
  f.name_ = "gaussian-well";
  f.params_ = {depth, width};
  f.amplitude_ = depth;
  f.frequency_ = width;
  return f;
}

ScalarField ScalarField::custom(std::string name, ValueFn value, GradientFn gradient, HessianFn hessian) {
  if (!value || !gradient || !hessian) throw InputError("custom field '" + name + "' needs value, gradient and hessian");
  ScalarField f;
  f.kind_ = Kind::kCustom;
  f.name_ = std::move(name);
  f.value_fn_ = std::make_shared<const ValueFn>(std::move(value));
  f.gradient_fn_ = std::make_shared<const GradientFn>(std::move(gradient));
  f.hessian_fn_ = std::make_shared<const HessianFn>(std::move(hessian));
  return f;
}

double ScalarField::value(std::span<const double> x) const {
  switch (kind_) {
    case Kind::kZero:
      return 0.0;
    case Kind::kPolynomial: {
      std::array<double, 5> c = poly_;
      c[0] = 0.0;
      double sum = poly_[0];
      for (double xk : x) sum += horner(c, xk);
      return sum;
    }
    case Kind::kCosine: {
      double sum = 0.0;
      for (double xk : x) sum += std::cos(frequency_ * xk);
      return amplitude_ * sum;
    }
    case Kind::kGaussianWell: {
      double r2 = 0.0;
      for (double xk : x) r2 += xk * xk;
      return -amplitude_ * std::exp(-r2 / (2.0 * frequency_ * frequency_));
    }
    case Kind::kCustom:
      return (*value_fn_)(x);
  }
  return 0.0;
}

void ScalarField::gradient(std::span<const double> x, std::span<double> out) const {
  switch (kind_) {
    case Kind::kZero:
      for (double& o : out) o = 0.0;
      return;
    case Kind::kPolynomial: {
      const auto dc = derivative(poly_);
      for (std::size_t k = 0; k < x.size(); ++k) out[k] = horner(dc, x[k]);
      return;
    }
    case Kind::kCosine:
      for (std::size_t k = 0; k < x.size(); ++k) out[k] = -amplitude_ * frequency_ * std::sin(frequency_ * x[k]);
      return;
    case Kind::kGaussianWell: {
      const double w2 = frequency_ * frequency_;
      double r2 = 0.0;
      for (double xk : x) r2 += xk * xk;
      const double g = amplitude_ * std::exp(-r2 / (2.0 * w2)) / w2;
      for (std::size_t k = 0; k < x.size(); ++k) out[k] = g * x[k];
      return;
    }
    case Kind::kCustom:
      (*gradient_fn_)(x, out);
      return;
  }
}

void ScalarField::hessian(std::span<const double> x, Eigen::Ref<Eigen::MatrixXd> out) const {
  out.setZero();
  switch (kind_) {
    case Kind::kZero:
      return;
    case Kind::kPolynomial: {
      const auto d2 = derivative(derivative(poly_));
      for (std::size_t k = 0; k < x.size(); ++k) out(k, k) = horner(d2, x[k]);
      return;
    }
    case Kind::kCosine:
      for (std::size_t k = 0; k < x.size(); ++k)
        out(k, k) = -amplitude_ * frequency_ * frequency_ * std::cos(frequency_ * x[k]);
      return;
    case Kind::kGaussianWell: {
      const double w2 = frequency_ * frequency_;
      double r2 = 0.0;
      for (double xk : x) r2 += xk * xk;
      const double g = amplitude_ * std::exp(-r2 / (2.0 * w2)) / w2;
      for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < x.size(); ++j) out(i, j) = -g * x[i] * x[j] / w2;
        out(i, i) += g;
      }
      return;
    }
    case Kind::kCustom:
      (*hessian_fn_)(x, out);
      return;
  }
}

Eigen::MatrixXd ScalarField::hessian(std::span<const double> x) const {
  Eigen::MatrixXd h(x.size(), x.size());
  hessian(x, h);
  return h;
}

// ---------------------------------------------------------------------------

Convolution::Convolution(const ScalarField& field, MeasureView mu)
    : field_(field), mu_(mu), dim_(mu.dim), mass_(mu.total_weight()) {
  const std::size_t n = mu_.size();
  switch (field_.kind()) {
    case ScalarField::Kind::kZero:
      moments_ = true;
      break;
    case ScalarField::Kind::kPolynomial: {
      moments_ = true;
      summary_.assign(dim_ * 5, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double w = mu_.weight(i);
        const auto y = mu_.point(i);
        for (std::size_t k = 0; k < dim_; ++k) {
          double p = w;
          for (int q = 0; q <= 4; ++q) {
            summary_[k * 5 + q] += p;
            p *= y[k];
          }
        }
      }
      break;
    }
    case ScalarField::Kind::kCosine: {
      moments_ = true;
      summary_.assign(dim_ * 2, 0.0);
      const double freq = field_.frequency();
      for (std::size_t i = 0; i < n; ++i) {
        const double w = mu_.weight(i);
        const auto y = mu_.point(i);
        for (std::size_t k = 0; k < dim_; ++k) {
          summary_[k * 2] += w * std::cos(freq * y[k]);
          summary_[k * 2 + 1] += w * std::sin(freq * y[k]);
        }
      }
      break;
    }
    default:
      moments_ = false;
  }
}

double Convolution::value(std::span<const double> x) const {
  switch (field_.kind()) {
    case ScalarField::Kind::kZero:
      return 0.0;
    case ScalarField::Kind::kPolynomial: {
      std::array<double, 5> c = field_.poly();
      c[0] = 0.0;
      double sum = field_.poly()[0] * mass_;
      for (std::size_t k = 0; k < dim_; ++k) sum += convolve_poly(c, x[k], &summary_[k * 5]);
      return sum;
    }
    case ScalarField::Kind::kCosine: {
      const double freq = field_.frequency();
      double sum = 0.0;
      for (std::size_t k = 0; k < dim_; ++k)
        sum += std::cos(freq * x[k]) * summary_[k * 2] + std::sin(freq * x[k]) * summary_[k * 2 + 1];
      return field_.amplitude() * sum;
    }
    default: {
      std::vector<double> diff(dim_);
      double sum = 0.0;
      for (std::size_t i = 0; i < mu_.size(); ++i) {
        const auto y = mu_.point(i);
        for (std::size_t k = 0; k < dim_; ++k) diff[k] = x[k] - y[k];
        sum += mu_.weight(i) * field_.value(diff);
      }
      return sum;
    }
  }
}

void Convolution::gradient(std::span<const double> x, std::span<double> out) const {
  for (double& o : out) o = 0.0;
  add_gradient(x, 1.0, out);
}

void Convolution::add_gradient(std::span<const double> x, double scale, std::span<double> out) const {
  switch (field_.kind()) {
    case ScalarField::Kind::kZero:
      return;
    case ScalarField::Kind::kPolynomial: {
      const auto dc = derivative(field_.poly());
      for (std::size_t k = 0; k < dim_; ++k) out[k] += scale * convolve_poly(dc, x[k], &summary_[k * 5]);
      return;
    }
    case ScalarField::Kind::kCosine: {
      const double freq = field_.frequency();
      const double amp = field_.amplitude();
      for (std::size_t k = 0; k < dim_; ++k) {
        const double s = std::sin(freq * x[k]);
        const double c = std::cos(freq * x[k]);
        out[k] += scale * amp * freq * (c * summary_[k * 2 + 1] - s * summary_[k * 2]);
      }
      return;
    }
    default: {
      std::vector<double> diff(dim_), grad(dim_);
      for (std::size_t i = 0; i < mu_.size(); ++i) {
        const auto y = mu_.point(i);
        for (std::size_t k = 0; k < dim_; ++k) diff[k] = x[k] - y[k];
        field_.gradient(diff, grad);
        const double w = scale * mu_.weight(i);
        for (std::size_t k = 0; k < dim_; ++k) out[k] += w * grad[k];
      }
    }
  }
}

Eigen::MatrixXd Convolution::hessian(std::span<const double> x) const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
  switch (field_.kind()) {
    case ScalarField::Kind::kZero:
      break;
    case ScalarField::Kind::kPolynomial: {
      const auto d2 = derivative(derivative(field_.poly()));
      for (std::size_t k = 0; k < dim_; ++k) h(k, k) = convolve_poly(d2, x[k], &summary_[k * 5]);
      break;
    }
    case ScalarField::Kind::kCosine: {
      const double freq = field_.frequency();
      for (std::size_t k = 0; k < dim_; ++k)
        h(k, k) = -field_.amplitude() * freq * freq *
                  (std::cos(freq * x[k]) * summary_[k * 2] + std::sin(freq * x[k]) * summary_[k * 2 + 1]);
      break;
    }
    default: {
      std::vector<double> diff(dim_);
      Eigen::MatrixXd hk(dim_, dim_);
      for (std::size_t i = 0; i < mu_.size(); ++i) {
        const auto y = mu_.point(i);
        for (std::size_t k = 0; k < dim_; ++k) diff[k] = x[k] - y[k];
        field_.hessian(diff, hk);
        h += mu_.weight(i) * hk;
      }
    }
  }
  return h;
}

double Convolution::self_energy() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < mu_.size(); ++i) sum += mu_.weight(i) * value(mu_.point(i));
  return sum;
}

// ---------------------------------------------------------------------------

ScalarFunction ScalarFunction::polynomial(std::vector<double> coeffs) {
  if (coeffs.empty()) coeffs = {0.0};
  ScalarFunction f;
  f.name_ = "polynomial";
  f.coeffs_ = coeffs;
  auto eval = [](std::vector<double> c) {
    return [c = std::move(c)](double t) {
      double acc = 0.0;
      for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
      return acc;
    };
  };
  std::vector<double> d1, d2;
  for (std::size_t j = 1; j < coeffs.size(); ++j) d1.push_back(static_cast<double>(j) * coeffs[j]);
  for (std::size_t j = 1; j < d1.size(); ++j) d2.push_back(static_cast<double>(j) * d1[j]);
  f.value_ = std::make_shared<const Fn>(eval(coeffs));
  f.first_ = std::make_shared<const Fn>(eval(d1));
  f.second_ = std::make_shared<const Fn>(eval(d2));
  return f;
}

ScalarFunction ScalarFunction::custom(std::string name, Fn value, Fn first, Fn second) {
  if (!value || !first || !second) throw InputError("custom psi '" + name + "' needs value and two derivatives");
  ScalarFunction f;
  f.name_ = std::move(name);
  f.value_ = std::make_shared<const Fn>(std::move(value));
  f.first_ = std::make_shared<const Fn>(std::move(first));
  f.second_ = std::make_shared<const Fn>(std::move(second));
  return f;
}

// ---------------------------------------------------------------------------

VectorField VectorField::linear_sine(double slope, double amplitude, double frequency) {
  VectorField f;
  f.name_ = "linear-sine";
  f.slope_ = slope;
  f.amplitude_ = amplitude;
  f.frequency_ = frequency;
  return f;
}

VectorField VectorField::custom(std::string name, Fn fn) {
  if (!fn) throw InputError("custom vector field '" + name + "' is empty");
  VectorField f;
  f.name_ = std::move(name);
  f.fn_ = std::make_shared<const Fn>(std::move(fn));
  return f;
}

void VectorField::apply(std::span<const double> v, std::span<double> out) const {
  for (double& o : out) o = 0.0;
  add(v, 1.0, out);
}

void VectorField::add(std::span<const double> v, double scale, std::span<double> out) const {
  if (fn_) {
    std::vector<double> tmp(v.size());
    (*fn_)(v, tmp);
    for (std::size_t k = 0; k < v.size(); ++k) out[k] += scale * tmp[k];
    return;
  }
  if (amplitude_ == 0.0) {
    if (slope_ != 0.0)
      for (std::size_t k = 0; k < v.size(); ++k) out[k] += scale * slope_ * v[k];
    return;
  }
  for (std::size_t k = 0; k < v.size(); ++k)
    out[k] += scale * (slope_ * v[k] + amplitude_ * std::sin(frequency_ * v[k]));
}

// ---------------------------------------------------------------------------

KBodyPotential KBodyPotential::pairwise_sum(int order, double coef, ScalarField pair) {
  if (order < 2) throw InputError("k-body potential: order must be >= 2");
  KBodyPotential w;
  w.order_ = order;
  w.pairwise_ = true;
  w.coef_ = coef;
  w.pair_ = std::move(pair);
  w.name_ = "pairwise-sum";
  return w;
}

KBodyPotential KBodyPotential::custom(int order, std::string name, ValueFn value, GradientFn grad_first,
                                      HessianFn hess_first, HessianFn cross_hess) {
  if (order < 2) throw InputError("k-body potential: order must be >= 2");
  if (!value || !grad_first || !hess_first || !cross_hess)
    throw InputError("custom k-body potential '" + name + "' is missing a derivative");
  KBodyPotential w;
  w.order_ = order;
  w.name_ = std::move(name);
  w.value_ = std::make_shared<const ValueFn>(std::move(value));
  w.grad_first_ = std::make_shared<const GradientFn>(std::move(grad_first));
  w.hess_first_ = std::make_shared<const HessianFn>(std::move(hess_first));
  w.cross_hess_ = std::make_shared<const HessianFn>(std::move(cross_hess));
  return w;
}

double KBodyPotential::value(std::span<const double> pts, std::size_t dim) const {
  if (!pairwise_) return (*value_)(pts, dim);
  std::vector<double> diff(dim);
  double sum = 0.0;
  for (int i = 0; i < order_; ++i) {
    for (int j = i + 1; j < order_; ++j) {
      for (std::size_t k = 0; k < dim; ++k) diff[k] = pts[i * dim + k] - pts[j * dim + k];
      sum += pair_.value(diff);
    }
  }
  return coef_ * sum;
}

void KBodyPotential::grad_first(std::span<const double> pts, std::size_t dim, std::span<double> out) const {
  if (!pairwise_) {
    (*grad_first_)(pts, dim, out);
    return;
  }
  std::vector<double> diff(dim), g(dim);
  for (double& o : out) o = 0.0;
  for (int j = 1; j < order_; ++j) {
    for (std::size_t k = 0; k < dim; ++k) diff[k] = pts[k] - pts[j * dim + k];
    pair_.gradient(diff, g);
    for (std::size_t k = 0; k < dim; ++k) out[k] += coef_ * g[k];
  }
}

void KBodyPotential::hess_first(std::span<const double> pts, std::size_t dim, Eigen::Ref<Eigen::MatrixXd> out) const {
  if (!pairwise_) {
    (*hess_first_)(pts, dim, out);
    return;
  }
  std::vector<double> diff(dim);
  Eigen::MatrixXd h(dim, dim);
  out.setZero();
  for (int j = 1; j < order_; ++j) {
    for (std::size_t k = 0; k < dim; ++k) diff[k] = pts[k] - pts[j * dim + k];
    pair_.hessian(diff, h);
    out += coef_ * h;
  }
}

void KBodyPotential::cross_hess(std::span<const double> pts, std::size_t dim, Eigen::Ref<Eigen::MatrixXd> out) const {
  if (!pairwise_) {
    (*cross_hess_)(pts, dim, out);
    return;
  }
  std::vector<double> diff(dim);
  for (std::size_t k = 0; k < dim; ++k) diff[k] = pts[k] - pts[dim + k];
  pair_.hessian(diff, out);
  out *= -coef_;
}

}  // namespace mflang

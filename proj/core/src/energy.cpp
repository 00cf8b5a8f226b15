#include "mflang/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mflang/error.hpp"
#include "mflang/rng.hpp"

namespace mflang {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double choose2(int k) { return 0.5 * k * (k - 1); }

// Index tuples for k-fold integrals against a weighted point set: either
// every tuple with its product weight, or i.i.d. draws proportional to the
// weights with a common scale.
struct TupleSet {
  int arity = 0;
  bool exhaustive = true;
  std::vector<std::uint32_t> indices;  // Monte-Carlo draws, arity per tuple
  double scale = 1.0;
};

TupleSet make_tuples(MeasureView mu, int arity) {
  TupleSet set;
  set.arity = arity;
  const double count = std::pow(static_cast<double>(mu.size()), arity);
  if (count <= EnergyAt::kExhaustiveTupleLimit) return set;

  set.exhaustive = false;
  std::vector<double> cumulative(mu.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) cumulative[i] = (total += mu.weight(i));
  // Fixed seed: the same tuples serve every query point (common random numbers).
  RngStream rng(0x6d666c616e67ull, stream_id(0, stream_role::kAuxiliary, static_cast<std::uint32_t>(arity)));
  set.indices.resize(EnergyAt::kMonteCarloTuples * arity);
  for (auto& idx : set.indices) {
    const double u = rng.next_uniform() * total;
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
    idx = static_cast<std::uint32_t>(std::min<std::size_t>(it - cumulative.begin(), mu.size() - 1));
  }
  set.scale = std::pow(total, arity) / static_cast<double>(EnergyAt::kMonteCarloTuples);
  return set;
}

// Calls f(points, weight) with `points` = prefix followed by the tuple's points.
template <class F>
void for_each_tuple(const TupleSet& set, MeasureView mu, std::span<const double> prefix, F&& f) {
  const std::size_t d = mu.dim;
  std::vector<double> pts(prefix.size() + set.arity * d);
  std::copy(prefix.begin(), prefix.end(), pts.begin());
  const std::size_t offset = prefix.size();
  auto place = [&](int slot, std::size_t index) {
    const auto y = mu.point(index);
    std::copy(y.begin(), y.end(), pts.begin() + offset + slot * d);
  };
  if (!set.exhaustive) {
    for (std::size_t t = 0; t < EnergyAt::kMonteCarloTuples; ++t) {
      for (int s = 0; s < set.arity; ++s) place(s, set.indices[t * set.arity + s]);
      f(std::span<const double>(pts), set.scale);
    }
    return;
  }
  if (set.arity == 0) {
    f(std::span<const double>(pts), 1.0);
    return;
  }
  const std::size_t n = mu.size();
  std::vector<std::size_t> odometer(set.arity, 0);
  for (int s = 0; s < set.arity; ++s) place(s, 0);
  while (true) {
    double w = 1.0;
    for (int s = 0; s < set.arity; ++s) w *= mu.weight(odometer[s]);
    f(std::span<const double>(pts), w);
    int s = set.arity - 1;
    while (s >= 0 && ++odometer[s] == n) {
      odometer[s] = 0;
      place(s, 0);
      --s;
    }
    if (s < 0) break;
    place(s, odometer[s]);
  }
}

bool sampled_even(const ScalarField& w) {
  static constexpr double kProbe[] = {0.37, -1.3, 2.9, 0.05, -4.1, 1.7};
  for (std::size_t d = 1; d <= 3; ++d) {
    for (std::size_t s = 0; s < 6; ++s) {
      std::vector<double> x(d), mx(d);
      for (std::size_t k = 0; k < d; ++k) {
        x[k] = kProbe[(s + k) % 6];
        mx[k] = -x[k];
      }
      const double a = w.value(x), b = w.value(mx);
      if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a))) return false;
    }
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------

EnergySpec::EnergySpec(EnergyFamily family, DeclaredConstants constants)
    : family_(std::move(family)), constants_(constants) {
  if (constants_.lambda < 0.0 || constants_.d2m_bound < 0.0 || constants_.dm_lip < 0.0 || constants_.grad_at_zero < 0.0)
    throw InputError("energy: declared constants must be nonnegative");
  if (const auto* tb = std::get_if<TwoBody>(&family_)) {
    if (!sampled_even(tb->interaction))
      throw InputError("energy: two-body interaction W must be even, W(-x) = W(x)");
  }
  if (const auto* poly = std::get_if<Polynomial>(&family_)) {
    for (const auto& w : poly->interactions) {
      if (w.is_pairwise() && !sampled_even(w.pair()))
        throw InputError("energy: pairwise k-body interaction must be even");
    }
  }
}

std::string EnergySpec::family_name() const {
  return std::visit(Overloaded{[](const TwoBody&) { return std::string("two-body"); },
                               [](const Polynomial&) { return std::string("polynomial"); },
                               [](const Internal&) { return std::string("internal"); }},
                    family_);
}

std::optional<LinearQuadratic> EnergySpec::linear_quadratic() const {
  const auto* tb = std::get_if<TwoBody>(&family_);
  if (tb == nullptr) return std::nullopt;
  LinearQuadratic lq;
  const auto& v = tb->confinement;
  const auto& w = tb->interaction;
  if (v.kind() == ScalarField::Kind::kPolynomial) {
    if (v.poly()[3] != 0.0 || v.poly()[4] != 0.0) return std::nullopt;
    lq.a_v = v.poly()[2];
    lq.b_v = v.poly()[1];
  } else if (!v.is_zero()) {
    return std::nullopt;
  }
  if (w.kind() == ScalarField::Kind::kPolynomial) {
    if (w.poly()[1] != 0.0 || w.poly()[3] != 0.0 || w.poly()[4] != 0.0) return std::nullopt;
    lq.a_w = w.poly()[2];
  } else if (!w.is_zero()) {
    return std::nullopt;
  }
  return lq;
}

bool EnergySpec::interaction_free() const {
  return std::visit(Overloaded{[](const TwoBody& tb) { return tb.interaction.is_zero(); },
                               [](const Polynomial& p) {
                                 return std::all_of(p.interactions.begin(), p.interactions.end(), [](const auto& w) {
                                   return w.is_pairwise() && (w.coef() == 0.0 || w.pair().is_zero());
                                 });
                               },
                               [](const Internal& in) { return in.field.is_zero(); }},
                    family_);
}

// ---------------------------------------------------------------------------

struct EnergyAt::Impl {
  struct Term {
    const KBodyPotential* potential = nullptr;
    std::optional<Convolution> conv;  // pairwise terms
    double self_energy = 0.0;         // pairwise terms of order >= 3
    TupleSet rest;                    // generic: arity k − 1
    TupleSet rest2;                   // generic: arity k − 2
  };

  double mass = 1.0;
  std::optional<Convolution> conv;  // two-body
  std::vector<Term> terms;          // polynomial
  double mean_field = 0.0;          // internal: ⟨μ, W⟩
};

EnergyAt::EnergyAt(const EnergySpec& spec, MeasureView mu) : spec_(&spec), mu_(mu), impl_(std::make_unique<Impl>()) {
  if (mu_.size() == 0) throw InputError("energy: empty measure");
  impl_->mass = mu_.total_weight();
  std::visit(Overloaded{[&](const TwoBody& tb) { impl_->conv.emplace(tb.interaction, mu_); },
                        [&](const Polynomial& p) {
                          for (const auto& w : p.interactions) {
                            Impl::Term term;
                            term.potential = &w;
                            if (w.is_pairwise()) {
                              term.conv.emplace(w.pair(), mu_);
                              if (w.order() >= 3) term.self_energy = term.conv->self_energy();
                            } else {
                              term.rest = make_tuples(mu_, w.order() - 1);
                              term.rest2 = make_tuples(mu_, w.order() - 2);
                            }
                            impl_->terms.push_back(std::move(term));
                          }
                        },
                        [&](const Internal& in) {
                          double sum = 0.0;
                          for (std::size_t i = 0; i < mu_.size(); ++i) sum += mu_.weight(i) * in.field.value(mu_.point(i));
                          impl_->mean_field = sum;
                        }},
             spec.family());
}

EnergyAt::~EnergyAt() = default;
EnergyAt::EnergyAt(EnergyAt&&) noexcept = default;

bool EnergyAt::subsampled() const noexcept {
  return std::any_of(impl_->terms.begin(), impl_->terms.end(),
                     [](const Impl::Term& t) { return !t.rest.exhaustive || !t.rest2.exhaustive; });
}

double EnergyAt::flat_derivative(std::span<const double> x) const {
  const double mass = impl_->mass;
  return std::visit(
      Overloaded{[&](const TwoBody& tb) { return tb.confinement.value(x) + impl_->conv->value(x); },
                 [&](const Polynomial& p) {
                   double sum = p.confinement.value(x);
                   for (const auto& term : impl_->terms) {
                     const auto& w = *term.potential;
                     const int k = w.order();
                     if (w.is_pairwise()) {
                       double inner = (k - 1) * std::pow(mass, k - 2) * term.conv->value(x);
                       if (k >= 3) inner += choose2(k - 1) * std::pow(mass, k - 3) * term.self_energy;
                       sum += k * w.coef() * inner;
                     } else {
                       double acc = 0.0;
                       for_each_tuple(term.rest, mu_, x,
                                      [&](std::span<const double> pts, double wt) { acc += wt * w.value(pts, mu_.dim); });
                       sum += k * acc;
                     }
                   }
                   return sum;
                 },
                 [&](const Internal& in) { return in.psi.first(impl_->mean_field) * in.field.value(x); }},
      spec_->family());
}

void EnergyAt::intrinsic_derivative(std::span<const double> x, std::span<double> out) const {
  for (double& o : out) o = 0.0;
  add_intrinsic_derivative(x, 1.0, out);
}

void EnergyAt::add_intrinsic_derivative(std::span<const double> x, double scale, std::span<double> out) const {
  const std::size_t d = mu_.dim;
  const double mass = impl_->mass;
  std::visit(Overloaded{[&](const TwoBody& tb) {
                          if (!tb.confinement.is_zero()) {
                            double g[8];
                            std::vector<double> heap;
                            std::span<double> grad(g, d);
                            if (d > 8) {
                              heap.resize(d);
                              grad = heap;
                            }
                            tb.confinement.gradient(x, grad);
                            for (std::size_t k = 0; k < d; ++k) out[k] += scale * grad[k];
                          }
                          impl_->conv->add_gradient(x, scale, out);
                        },
                        [&](const Polynomial& p) {
                          std::vector<double> grad(d);
                          p.confinement.gradient(x, grad);
                          for (std::size_t k = 0; k < d; ++k) out[k] += scale * grad[k];
                          for (const auto& term : impl_->terms) {
                            const auto& w = *term.potential;
                            const int k = w.order();
                            if (w.is_pairwise()) {
                              term.conv->add_gradient(x, scale * k * (k - 1) * w.coef() * std::pow(mass, k - 2), out);
                            } else {
                              for_each_tuple(term.rest, mu_, x, [&](std::span<const double> pts, double wt) {
                                w.grad_first(pts, d, grad);
                                for (std::size_t c = 0; c < d; ++c) out[c] += scale * k * wt * grad[c];
                              });
                            }
                          }
                        },
                        [&](const Internal& in) {
                          std::vector<double> grad(d);
                          in.field.gradient(x, grad);
                          const double factor = scale * in.psi.first(impl_->mean_field);
                          for (std::size_t k = 0; k < d; ++k) out[k] += factor * grad[k];
                        }},
             spec_->family());
}

Eigen::MatrixXd EnergyAt::intrinsic_jacobian(std::span<const double> x) const {
  const std::size_t d = mu_.dim;
  const double mass = impl_->mass;
  return std::visit(
      Overloaded{[&](const TwoBody& tb) -> Eigen::MatrixXd {
                   return tb.confinement.hessian(x) + impl_->conv->hessian(x);
                 },
                 [&](const Polynomial& p) -> Eigen::MatrixXd {
                   Eigen::MatrixXd h = p.confinement.hessian(x);
                   Eigen::MatrixXd hk(d, d);
                   for (const auto& term : impl_->terms) {
                     const auto& w = *term.potential;
                     const int k = w.order();
                     if (w.is_pairwise()) {
                       h += (k * (k - 1) * w.coef() * std::pow(mass, k - 2)) * term.conv->hessian(x);
                     } else {
                       for_each_tuple(term.rest, mu_, x, [&](std::span<const double> pts, double wt) {
                         w.hess_first(pts, d, hk);
                         h += (k * wt) * hk;
                       });
                     }
                   }
                   return h;
                 },
                 [&](const Internal& in) -> Eigen::MatrixXd {
                   return in.psi.first(impl_->mean_field) * in.field.hessian(x);
                 }},
      spec_->family());
}

Eigen::MatrixXd EnergyAt::second_intrinsic(std::span<const double> x, std::span<const double> y) const {
  const std::size_t d = mu_.dim;
  const double mass = impl_->mass;
  return std::visit(
      Overloaded{[&](const TwoBody& tb) -> Eigen::MatrixXd {
                   std::vector<double> diff(d);
                   for (std::size_t k = 0; k < d; ++k) diff[k] = x[k] - y[k];
                   return -tb.interaction.hessian(diff);
                 },
                 [&](const Polynomial&) -> Eigen::MatrixXd {
                   Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
                   Eigen::MatrixXd hk(d, d);
                   std::vector<double> xy(2 * d);
                   std::copy(x.begin(), x.end(), xy.begin());
                   std::copy(y.begin(), y.end(), xy.begin() + d);
                   for (const auto& term : impl_->terms) {
                     const auto& w = *term.potential;
                     const int k = w.order();
                     if (w.is_pairwise()) {
                       w.cross_hess(xy, d, hk);
                       h += (k * (k - 1) * std::pow(mass, k - 2)) * hk;
                     } else {
                       for_each_tuple(term.rest2, mu_, xy, [&](std::span<const double> pts, double wt) {
                         w.cross_hess(pts, d, hk);
                         h += (k * (k - 1) * wt) * hk;
                       });
                     }
                   }
                   return h;
                 },
                 [&](const Internal& in) -> Eigen::MatrixXd {
                   std::vector<double> gx(d), gy(d);
                   in.field.gradient(x, gx);
                   in.field.gradient(y, gy);
                   Eigen::Map<const Eigen::VectorXd> ex(gx.data(), d), ey(gy.data(), d);
                   return in.psi.second(impl_->mean_field) * (ex * ey.transpose());
                 }},
      spec_->family());
}

double EnergyAt::energy() const {
  const double mass = impl_->mass;
  auto confinement_mean = [&](const ScalarField& v) {
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_.size(); ++i) sum += mu_.weight(i) * v.value(mu_.point(i));
    return sum;
  };
  return std::visit(Overloaded{[&](const TwoBody& tb) {
                                 return confinement_mean(tb.confinement) + 0.5 * impl_->conv->self_energy();
                               },
                               [&](const Polynomial& p) {
                                 double sum = confinement_mean(p.confinement);
                                 for (const auto& term : impl_->terms) {
                                   const auto& w = *term.potential;
                                   const int k = w.order();
                                   if (w.is_pairwise()) {
                                     sum += w.coef() * choose2(k) * std::pow(mass, k - 2) * term.conv->self_energy();
                                   } else {
                                     const TupleSet all = make_tuples(mu_, k);
                                     for_each_tuple(all, mu_, {}, [&](std::span<const double> pts, double wt) {
                                       sum += wt * w.value(pts, mu_.dim);
                                     });
                                   }
                                 }
                                 return sum;
                               },
                               [&](const Internal& in) { return in.psi.value(impl_->mean_field); }},
                    spec_->family());
}

// ---------------------------------------------------------------------------

double flat_derivative(const EnergySpec& spec, MeasureView mu, std::span<const double> x) {
  return EnergyAt(spec, mu).flat_derivative(x);
}

double flat_derivative(const EnergySpec& spec, const EmpiricalMeasure& mu, std::span<const double> x) {
  return flat_derivative(spec, view(mu), x);
}

double flat_derivative(const EnergySpec& spec, const GridMeasure1D& mu, std::span<const double> x) {
  const auto q = quadrature_points(mu);
  return flat_derivative(spec, q.view(), x);
}

double energy_value(const EnergySpec& spec, MeasureView mu) { return EnergyAt(spec, mu).energy(); }

double energy_value(const EnergySpec& spec, const EmpiricalMeasure& mu) { return energy_value(spec, view(mu)); }

std::vector<double> intrinsic_derivative(const EnergySpec& spec, MeasureView mu, std::span<const double> x) {
  std::vector<double> out(x.size());
  EnergyAt(spec, mu).intrinsic_derivative(x, out);
  return out;
}

std::vector<double> intrinsic_derivative(const EnergySpec& spec, const EmpiricalMeasure& mu,
                                         std::span<const double> x) {
  return intrinsic_derivative(spec, view(mu), x);
}

std::vector<double> intrinsic_derivative(const EnergySpec& spec, const GridMeasure1D& mu, std::span<const double> x) {
  const auto q = quadrature_points(mu);
  return intrinsic_derivative(spec, q.view(), x);
}

Eigen::MatrixXd second_intrinsic_apply(const EnergySpec& spec, MeasureView mu, std::span<const double> x,
                                       std::span<const double> y) {
  return EnergyAt(spec, mu).second_intrinsic(x, y);
}

Eigen::MatrixXd second_intrinsic_apply(const EnergySpec& spec, const EmpiricalMeasure& mu, std::span<const double> x,
                                       std::span<const double> y) {
  return second_intrinsic_apply(spec, view(mu), x, y);
}

double operator_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

// ---------------------------------------------------------------------------

AssumptionReport check_assumptions(const EnergySpec& spec, const EmpiricalMeasure& sample_points,
                                   std::span<const EmpiricalMeasure> sample_measures, double tolerance) {
  if (sample_measures.empty()) throw InputError("check_assumptions: need at least one sample measure");
  const std::size_t d = sample_points.dim();
  const auto& declared = spec.constants();
  AssumptionReport r;
  r.monotonicity_min = std::numeric_limits<double>::infinity();
  r.jacobian_min_eig = std::numeric_limits<double>::infinity();
  std::vector<double> zero(d, 0.0), g0(d);

  for (const auto& mu : sample_measures) {
    if (mu.dim() != d) throw InputError("check_assumptions: sample measure dimension mismatch");
    const EnergyAt at(spec, view(mu));
    const std::size_t n = sample_points.size();
    std::vector<std::vector<double>> grads(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = sample_points.point(i);
      at.intrinsic_derivative(x, grads[i]);
      Eigen::MatrixXd jac = at.intrinsic_jacobian(x);
      const Eigen::MatrixXd sym = 0.5 * (jac + jac.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
      r.jacobian_min_eig = std::min(r.jacobian_min_eig, eig.eigenvalues()(0));
    }
    at.intrinsic_derivative(zero, g0);
    double norm0 = 0.0;
    for (double v : g0) norm0 += v * v;
    r.grad_at_zero_max = std::max(r.grad_at_zero_max, std::sqrt(norm0));

    for (std::size_t i = 0; i < n; ++i) {
      const auto x = sample_points.point(i);
      for (std::size_t j = 0; j < n; ++j) {
        const auto y = sample_points.point(j);
        r.d2m_max = std::max(r.d2m_max, operator_norm(at.second_intrinsic(x, y)));
        if (j <= i) continue;
        double dx2 = 0.0, inner = 0.0, dg2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double dx = x[k] - y[k];
          const double dg = grads[i][k] - grads[j][k];
          dx2 += dx * dx;
          inner += dg * dx;
          dg2 += dg * dg;
        }
        if (dx2 == 0.0) continue;
        ++r.pairs_checked;
        r.monotonicity_min = std::min(r.monotonicity_min, inner / dx2);
        r.dm_lip_max = std::max(r.dm_lip_max, std::sqrt(dg2 / dx2));
      }
    }
  }

  if (r.pairs_checked == 0) r.monotonicity_min = r.jacobian_min_eig;
  r.monotonicity_margin = r.monotonicity_min - declared.lambda;
  r.d2m_margin = declared.d2m_bound - r.d2m_max;
  r.dm_lip_margin = declared.dm_lip - r.dm_lip_max;
  r.grad_at_zero_margin = declared.grad_at_zero - r.grad_at_zero_max;

  auto flag = [&](double margin, const char* what) {
    if (margin < -tolerance) r.violations.push_back(std::string(what) + " (margin " + std::to_string(margin) + ")");
  };
  flag(r.monotonicity_margin, "monotonicity constant lambda overclaimed");
  flag(r.d2m_margin, "second intrinsic derivative bound exceeded");
  if (declared.dm_lip > 0.0) flag(r.dm_lip_margin, "intrinsic derivative Lipschitz bound exceeded");
  if (declared.grad_at_zero > 0.0) flag(r.grad_at_zero_margin, "gradient-at-zero bound exceeded");
  return r;
}

void KineticFields::validate() const {
  if (lambda_b < 0.0) throw InputError("kinetic fields: lambda_b must be >= 0");
  if (lip_a < 0.0 || mono_a < 0.0 || lip_d < 0.0) throw InputError("kinetic fields: declared constants must be >= 0");
}

KineticFieldReport check_kinetic_fields(const KineticFields& fields, const EmpiricalMeasure& sample_points,
                                        double tolerance) {
  const std::size_t d = sample_points.dim();
  const std::size_t n = sample_points.size();
  KineticFieldReport r;
  r.mono_a_min = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> a(n, std::vector<double>(d)), dd(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    fields.friction.apply(sample_points.point(i), a[i]);
    fields.perturbation.apply(sample_points.point(i), dd[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dx2 = 0.0, inner = 0.0, da2 = 0.0, dd2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double dx = sample_points.point(i)[k] - sample_points.point(j)[k];
        const double da = a[i][k] - a[j][k];
        const double ddk = dd[i][k] - dd[j][k];
        dx2 += dx * dx;
        inner += da * dx;
        da2 += da * da;
        dd2 += ddk * ddk;
      }
      if (dx2 == 0.0) continue;
      r.mono_a_min = std::min(r.mono_a_min, inner / dx2);
      r.lip_a_max = std::max(r.lip_a_max, std::sqrt(da2 / dx2));
      r.lip_d_max = std::max(r.lip_d_max, std::sqrt(dd2 / dx2));
    }
  }
  r.mono_a_margin = r.mono_a_min - fields.mono_a;
  r.lip_a_margin = fields.lip_a - r.lip_a_max;
  r.lip_d_margin = fields.lip_d - r.lip_d_max;
  if (r.mono_a_margin < -tolerance) r.violations.push_back("friction monotonicity lambda_A overclaimed");
  if (r.lip_a_margin < -tolerance) r.violations.push_back("friction Lipschitz constant [A]_1 exceeded");
  if (r.lip_d_margin < -tolerance) r.violations.push_back("perturbation Lipschitz constant [D]_1 exceeded");
  return r;
}

}  // namespace mflang

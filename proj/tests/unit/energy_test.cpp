#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <vector>

#include "mflang/energy.hpp"
#include "mflang/error.hpp"

using namespace mflang;

namespace {

const std::vector<double> kOrigin{0.0};

EnergySpec two_body(ScalarField v, ScalarField w, DeclaredConstants c = {}) {
  return EnergySpec(TwoBody{std::move(v), std::move(w)}, c);
}

std::vector<double> draw(std::size_t n, std::size_t d, RngStream& rng, double sd = 1.0) {
  std::vector<double> x(n * d);
  for (double& v : x) v = sd * rng.next_normal();
  return x;
}

KBodyPotential sum_squared(int order, double c) {
  return KBodyPotential::custom(
      order, "sum-squared",
      [=](std::span<const double> pts, std::size_t dim) {
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
          double t = 0.0;
          for (int j = 0; j < order; ++j) t += pts[j * dim + k];
          s += t * t;
        }
        return c * s;
      },
      [=](std::span<const double> pts, std::size_t dim, std::span<double> out) {
        for (std::size_t k = 0; k < dim; ++k) {
          double t = 0.0;
          for (int j = 0; j < order; ++j) t += pts[j * dim + k];
          out[k] = 2.0 * c * t;
        }
      },
      [=](std::span<const double>, std::size_t dim, Eigen::Ref<Eigen::MatrixXd> out) {
        out = 2.0 * c * Eigen::MatrixXd::Identity(dim, dim);
      },
      [=](std::span<const double>, std::size_t dim, Eigen::Ref<Eigen::MatrixXd> out) {
        out = 2.0 * c * Eigen::MatrixXd::Identity(dim, dim);
      });
}

// Energies whose flat-derivative integrand is polynomial in the
// interpolation parameter.
std::vector<EnergySpec> polynomial_energies() {
  std::vector<EnergySpec> out;
  out.push_back(two_body(ScalarField::quadratic(1.0, 0.3, 0.0), ScalarField::quadratic(0.5, 0.0, 0.0)));
  out.push_back(two_body(ScalarField::quartic(0.1, 0.0, 0.5, 0.2, 0.0), ScalarField::quartic(0.05, 0.0, -0.3, 0.0, 1.0)));
  out.push_back(EnergySpec(Polynomial{ScalarField::quadratic(1.0, 0.0, 0.0),
                                      {KBodyPotential::pairwise_sum(2, 0.7, ScalarField::quadratic(1.0, 0.0, 0.0)),
                                       KBodyPotential::pairwise_sum(3, 0.2, ScalarField::quartic(0.1, 0.0, 1.0, 0.0, 0.0))}}));
  out.push_back(EnergySpec(Polynomial{ScalarField::zero(), {sum_squared(3, 0.3)}}));
  out.push_back(EnergySpec(Internal{ScalarFunction::polynomial({0.0, 1.0, 0.5, 0.1}), ScalarField::quadratic(1.0, 0.5, 0.0)}));
  return out;
}

std::vector<EnergySpec> smooth_energies() {
  auto out = polynomial_energies();
  out.push_back(two_body(ScalarField::quadratic(2.0, 0.0, 0.0), ScalarField::cosine(0.1, 1.0)));
  out.push_back(two_body(ScalarField::quartic(0.2, 0.0, 1.0, 0.0, 0.0), ScalarField::gaussian_well(1.0, 0.7)));
  out.push_back(EnergySpec(Internal{ScalarFunction::custom(
                                        "exp", [](double t) { return std::exp(t); }, [](double t) { return std::exp(t); },
                                        [](double t) { return std::exp(t); }),
                                    ScalarField::cosine(0.5, 1.3)}));
  return out;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(FlatDerivative, Examples) {
  const auto mu = EmpiricalMeasure::line({-3.0, 0.5, 4.0});
  const std::vector<double> x2{2.0}, x3{3.0};
  EXPECT_DOUBLE_EQ(flat_derivative(two_body(ScalarField::quadratic(0.5, 0.0, 0.0), ScalarField::zero()), mu, x2), 2.0);
  EXPECT_DOUBLE_EQ(flat_derivative(two_body(ScalarField::zero(), ScalarField::quadratic(0.5, 0.0, 0.0)),
                                   EmpiricalMeasure::line({0.0}), x3),
                   4.5);
  const auto w = ScalarField::cosine(0.7, 2.0);
  EXPECT_DOUBLE_EQ(flat_derivative(EnergySpec(Internal{ScalarFunction::identity(), w}), mu, x3), w.value(x3));
}

TEST(EnergyValue, Examples) {
  EXPECT_DOUBLE_EQ(energy_value(two_body(ScalarField::quadratic(1.0, 0.0, 0.0), ScalarField::zero()),
                                EmpiricalMeasure::line({-1.0, 1.0})),
                   1.0);
  // ½·(1/4)·(0 + 2 + 2 + 0)
  EXPECT_DOUBLE_EQ(energy_value(two_body(ScalarField::zero(), ScalarField::quadratic(0.5, 0.0, 0.0)),
                                EmpiricalMeasure::line({0.0, 2.0})),
                   0.5);
  EXPECT_DOUBLE_EQ(energy_value(EnergySpec(Internal{ScalarFunction::polynomial({0.0, 0.0, 1.0}),
                                                    ScalarField::quadratic(0.0, 1.0, 0.0)}),
                                EmpiricalMeasure::line({3.0})),
                   9.0);
}

TEST(IntrinsicDerivative, Examples) {
  const std::vector<double> x2{2.0}, x1{1.0};
  EXPECT_DOUBLE_EQ(intrinsic_derivative(two_body(ScalarField::quadratic(0.5, 0.0, 0.0), ScalarField::zero()),
                                        EmpiricalMeasure::line({5.0}), x2)[0],
                   2.0);
  // V = 2x², W = κx²/2 with κ = 1: 4x + κ(x − m̄); m̄ = 0, x = 1 → 5.
  const auto spec = two_body(ScalarField::quadratic(2.0, 0.0, 0.0), ScalarField::quadratic(0.5, 0.0, 0.0));
  EXPECT_DOUBLE_EQ(intrinsic_derivative(spec, EmpiricalMeasure::line({-1.0, 1.0}), x1)[0], 5.0);
  EXPECT_DOUBLE_EQ(intrinsic_derivative(spec, EmpiricalMeasure::line({1.0, 2.0}), x1)[0], 4.0 + (1.0 - 1.5));
}

TEST(IntrinsicDerivative, MatchesFiniteDifferenceOfFlatDerivative) {
  RngStream rng(21, 0);
  const double h = 1e-5;
  int cases = 0;
  for (const auto& spec : smooth_energies()) {
    for (std::size_t d : {1u, 2u}) {
      for (int rep = 0; rep < 7; ++rep, ++cases) {
        const auto pts = draw(12, d, rng);
        const MeasureView mu{d, pts, {}};
        const EnergyAt at(spec, mu);
        const auto x = draw(1, d, rng);
        std::vector<double> g(d);
        at.intrinsic_derivative(x, g);
        for (std::size_t k = 0; k < d; ++k) {
          auto xp = x, xm = x;
          xp[k] += h;
          xm[k] -= h;
          const double fd = (at.flat_derivative(xp) - at.flat_derivative(xm)) / (2.0 * h);
          EXPECT_LT(rel(g[k], fd), 1e-5) << spec.family_name() << " d=" << d;
        }
      }
    }
  }
  EXPECT_GE(cases, 100);
}

TEST(IntrinsicJacobian, MatchesFiniteDifferenceOfIntrinsicDerivative) {
  RngStream rng(22, 0);
  const double h = 1e-5;
  for (const auto& spec : smooth_energies()) {
    const std::size_t d = 2;
    const auto pts = draw(10, d, rng);
    const EnergyAt at(spec, MeasureView{d, pts, {}});
    const auto x = draw(1, d, rng);
    const Eigen::MatrixXd J = at.intrinsic_jacobian(x);
    for (std::size_t k = 0; k < d; ++k) {
      auto xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      std::vector<double> gp(d), gm(d);
      at.intrinsic_derivative(xp, gp);
      at.intrinsic_derivative(xm, gm);
      for (std::size_t j = 0; j < d; ++j) EXPECT_LT(rel(J(j, k), (gp[j] - gm[j]) / (2.0 * h)), 1e-5);
    }
  }
}

// H(μ₁) − H(μ₀) = ∫₀¹ ∫ δH/δm(μ_t, z)(μ₁ − μ₀)(dz) dt, μ_t = (1−t)μ₀ + tμ₁.
TEST(FlatDerivative, InterpolationIdentity) {
  RngStream rng(23, 0);
  for (const auto& spec : polynomial_energies()) {
    for (std::size_t d : {1u, 2u}) {
      for (int rep = 0; rep < 4; ++rep) {
        const std::size_t n = 7;
        const auto x0 = draw(n, d, rng), x1 = draw(n, d, rng, 1.5);
        std::vector<double> both(x0);
        both.insert(both.end(), x1.begin(), x1.end());
        auto integrand = [&](double t) {
          std::vector<double> w(2 * n);
          for (std::size_t i = 0; i < n; ++i) {
            w[i] = (1.0 - t) / n;
            w[n + i] = t / n;
          }
          const EnergyAt at(spec, MeasureView{d, both, w});
          double s = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            s += at.flat_derivative(std::span<const double>(x1).subspan(i * d, d)) / n;
            s -= at.flat_derivative(std::span<const double>(x0).subspan(i * d, d)) / n;
          }
          return s;
        };
        const double lhs = energy_value(spec, MeasureView{d, x1, {}}) - energy_value(spec, MeasureView{d, x0, {}});
        const double rhs = boost::math::quadrature::gauss<double, 64>::integrate(integrand, 0.0, 1.0);
        EXPECT_NEAR(lhs, rhs, 1e-8) << spec.family_name() << " d=" << d;
      }
    }
  }
}

TEST(Polynomial, TwoBodyIsPairwiseHalf) {
  RngStream rng(24, 0);
  const auto V = ScalarField::quartic(0.1, 0.0, 1.0, 0.3, 0.0);
  for (const auto& W : {ScalarField::quadratic(0.7, 0.0, 0.2), ScalarField::cosine(0.3, 1.1), ScalarField::gaussian_well(1.0, 0.5)}) {
    const auto tb = two_body(V, W);
    const EnergySpec poly(Polynomial{V, {KBodyPotential::pairwise_sum(2, 0.5, W)}});
    const std::size_t d = 2;
    const auto pts = draw(15, d, rng);
    const MeasureView mu{d, pts, {}};
    const EnergyAt a(tb, mu), b(poly, mu);
    EXPECT_NEAR(a.energy(), b.energy(), 1e-12);
    for (int rep = 0; rep < 5; ++rep) {
      const auto x = draw(1, d, rng), y = draw(1, d, rng);
      EXPECT_NEAR(a.flat_derivative(x), b.flat_derivative(x), 1e-12);
      std::vector<double> ga(d), gb(d);
      a.intrinsic_derivative(x, ga);
      b.intrinsic_derivative(x, gb);
      for (std::size_t k = 0; k < d; ++k) EXPECT_NEAR(ga[k], gb[k], 1e-12);
      EXPECT_LT((a.second_intrinsic(x, y) - b.second_intrinsic(x, y)).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((a.intrinsic_jacobian(x) - b.intrinsic_jacobian(x)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Polynomial, PairwiseMatchesGenericTupleSum) {
  // Σ_{i<j}|x_i − x_j|² written as a custom potential vs the pairwise path.
  RngStream rng(25, 0);
  const double c = 0.4;
  const auto custom = KBodyPotential::custom(
      3, "pairs",
      [=](std::span<const double> p, std::size_t) {
        return c * ((p[0] - p[1]) * (p[0] - p[1]) + (p[0] - p[2]) * (p[0] - p[2]) + (p[1] - p[2]) * (p[1] - p[2]));
      },
      [=](std::span<const double> p, std::size_t, std::span<double> out) {
        out[0] = c * 2.0 * ((p[0] - p[1]) + (p[0] - p[2]));
      },
      [=](std::span<const double>, std::size_t, Eigen::Ref<Eigen::MatrixXd> out) { out(0, 0) = 4.0 * c; },
      [=](std::span<const double>, std::size_t, Eigen::Ref<Eigen::MatrixXd> out) { out(0, 0) = -2.0 * c; });
  const EnergySpec a(Polynomial{ScalarField::zero(), {custom}});
  const EnergySpec b(Polynomial{ScalarField::zero(), {KBodyPotential::pairwise_sum(3, c, ScalarField::quadratic(1.0, 0.0, 0.0))}});
  const auto pts = draw(9, 1, rng);
  const MeasureView mu{1, pts, {}};
  const EnergyAt ea(a, mu), eb(b, mu);
  EXPECT_FALSE(ea.subsampled());
  EXPECT_NEAR(ea.energy(), eb.energy(), 1e-11);
  const std::vector<double> x{0.37}, y{-1.2};
  EXPECT_NEAR(ea.flat_derivative(x), eb.flat_derivative(x), 1e-11);
  std::vector<double> ga(1), gb(1);
  ea.intrinsic_derivative(x, ga);
  eb.intrinsic_derivative(x, gb);
  EXPECT_NEAR(ga[0], gb[0], 1e-11);
  EXPECT_NEAR(ea.second_intrinsic(x, y)(0, 0), eb.second_intrinsic(x, y)(0, 0), 1e-11);
}

TEST(SecondIntrinsic, Examples) {
  const auto mu = EmpiricalMeasure::line({0.0, 1.0});
  const std::vector<double> x{0.4}, y{-2.0};
  EXPECT_DOUBLE_EQ(second_intrinsic_apply(two_body(ScalarField::zero(), ScalarField::quadratic(0.5, 0.0, 0.0)), mu, x, y)(0, 0), -1.0);
  EXPECT_EQ(second_intrinsic_apply(EnergySpec(Internal{ScalarFunction::identity(), ScalarField::cosine(1.0, 1.0)}), mu, x, y)
                .cwiseAbs()
                .maxCoeff(),
            0.0);
  EXPECT_DOUBLE_EQ(second_intrinsic_apply(two_body(ScalarField::zero(), ScalarField::cosine(0.25, 1.0)), mu, x, x)(0, 0), 0.25);
}

TEST(SecondIntrinsic, InternalIsRankOne) {
  RngStream rng(26, 0);
  const EnergySpec spec(Internal{ScalarFunction::polynomial({0.0, 0.3, 1.0, 0.2}), ScalarField::gaussian_well(1.0, 1.5)});
  const std::size_t d = 3;
  const auto pts = draw(20, d, rng);
  const EnergyAt at(spec, MeasureView{d, pts, {}});
  for (int rep = 0; rep < 10; ++rep) {
    const auto x = draw(1, d, rng), y = draw(1, d, rng);
    const Eigen::MatrixXd M = at.second_intrinsic(x, y);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k)
          for (std::size_t l = k + 1; l < d; ++l) EXPECT_LT(std::abs(M(i, k) * M(j, l) - M(i, l) * M(j, k)), 1e-10);
  }
}

TEST(EnergyAt, SecondIntrinsicMatchesFiniteDifferenceInMeasure) {
  // D²_mH(μ,x,y) = ∇_y D_mH(μ_ε,x)/ε as mass ε moves to δ_y, for two-body.
  const auto spec = two_body(ScalarField::quadratic(1.0, 0.0, 0.0), ScalarField::cosine(0.3, 1.0));
  const std::vector<double> pts{-1.0, 0.5, 2.0};
  const std::vector<double> x{0.2}, y{1.1};
  const double h = 1e-5;
  auto grad_at = [&](double yy) {
    std::vector<double> both = pts;
    both.push_back(yy);
    const std::vector<double> w{1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0};
    std::vector<double> g(1);
    EnergyAt(spec, MeasureView{1, both, w}).intrinsic_derivative(x, g);
    return g[0];
  };
  const double fd = (grad_at(y[0] + h) - grad_at(y[0] - h)) / (2.0 * h);
  EXPECT_NEAR(second_intrinsic_apply(spec, EmpiricalMeasure::line(pts), x, y)(0, 0), fd, 1e-6);
}

TEST(EnergySpec, Validation) {
  EXPECT_THROW(two_body(ScalarField::zero(), ScalarField::quadratic(1.0, 1.0, 0.0)), InputError);
  EXPECT_THROW(two_body(ScalarField::zero(), ScalarField::zero(), DeclaredConstants{-1.0, 0.0, 0.0, 0.0}), InputError);
  EXPECT_NO_THROW(two_body(ScalarField::zero(), ScalarField::cosine(1.0, 2.0)));
}

TEST(EnergySpec, LinearQuadraticDetection) {
  const auto lq = two_body(ScalarField::quadratic(1.0, 0.5, 2.0), ScalarField::quadratic(0.5, 0.0, 1.0)).linear_quadratic();
  ASSERT_TRUE(lq.has_value());
  EXPECT_EQ(lq->a_v, 1.0);
  EXPECT_EQ(lq->b_v, 0.5);
  EXPECT_EQ(lq->a_w, 0.5);
  EXPECT_FALSE(two_body(ScalarField::quadratic(1.0, 0.0, 0.0), ScalarField::cosine(0.1, 1.0)).linear_quadratic());
  EXPECT_TRUE(two_body(ScalarField::quadratic(1.0, 0.0, 0.0), ScalarField::zero()).interaction_free());
  EXPECT_FALSE(two_body(ScalarField::quadratic(1.0, 0.0, 0.0), ScalarField::cosine(0.1, 1.0)).interaction_free());
}

TEST(EnergyAt, MonteCarloFallbackAboveTupleLimit) {
  RngStream rng(27, 0);
  const EnergySpec spec(Polynomial{ScalarField::zero(), {sum_squared(4, 0.1)}});
  const auto pts = draw(300, 1, rng);  // 300³ > 1e7
  const EnergyAt at(spec, MeasureView{1, pts, {}});
  EXPECT_TRUE(at.subsampled());
  // Exact: 0.1·E|X1+..+X4|² = 0.1·(4 m2 + 12 m1²) for iid draws from μ.
  double m1 = 0.0, m2 = 0.0;
  for (double p : pts) {
    m1 += p / 300.0;
    m2 += p * p / 300.0;
  }
  EXPECT_NEAR(at.energy(), 0.1 * (4.0 * m2 + 12.0 * m1 * m1), 0.05 * 0.1 * 4.0 * m2);
}

TEST(CheckAssumptions, Examples) {
  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(-4.0 + 0.2 * i);
  const auto points = EmpiricalMeasure::line(grid);
  RngStream rng(28, 0);
  const std::vector<EmpiricalMeasure> measures{EmpiricalMeasure::line(draw(32, 1, rng)),
                                               EmpiricalMeasure::line(draw(32, 1, rng, 2.0))};
  const auto V = ScalarField::quadratic(2.0, 0.0, 0.0);
  const auto W = ScalarField::cosine(0.1, 1.0);
  const auto ok = check_assumptions(two_body(V, W, {3.9, 0.1, 4.1, 0.1}), points, measures);
  EXPECT_TRUE(ok.ok());
  EXPECT_GE(ok.monotonicity_margin, -1e-12);
  EXPECT_GE(ok.d2m_margin, -1e-12);
  EXPECT_GE(ok.jacobian_min_eig, 3.9 - 1e-12);

  const auto bad = check_assumptions(two_body(V, W, {10.0, 0.1, 4.1, 0.1}), points, measures);
  EXPECT_FALSE(bad.ok());
  EXPECT_LT(bad.monotonicity_margin, 0.0);

  const auto free = check_assumptions(two_body(V, ScalarField::zero(), {4.0, 0.3, 0.0, 0.0}), points, measures);
  EXPECT_DOUBLE_EQ(free.d2m_margin, 0.3);
}

TEST(KineticFields, SampledChecks) {
  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(-4.0 + 0.2 * i);
  const auto pts = EmpiricalMeasure::line(grid);
  KineticFields f;
  f.friction = VectorField::linear_sine(1.0, 0.2, 1.0);
  f.lip_a = 1.2;
  f.mono_a = 0.8;
  EXPECT_TRUE(check_kinetic_fields(f, pts).ok());
  f.mono_a = 0.9;
  EXPECT_FALSE(check_kinetic_fields(f, pts).ok());
  f.mono_a = 0.8;
  f.perturbation = VectorField::linear_sine(0.0, 0.3, 2.0);
  f.lip_d = 0.5;
  EXPECT_FALSE(check_kinetic_fields(f, pts).ok());
  f.lip_d = 0.6;
  EXPECT_TRUE(check_kinetic_fields(f, pts).ok());
  f.lambda_b = -1.0;
  EXPECT_THROW(f.validate(), InputError);
}

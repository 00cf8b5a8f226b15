#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mflang/potentials.hpp"
#include "mflang/rng.hpp"

using namespace mflang;

namespace {

std::vector<ScalarField> catalog() {
  return {ScalarField::quadratic(1.5, -0.3, 2.0), ScalarField::quartic(0.25, 0.1, -1.0, 0.5, 1.0),
          ScalarField::cosine(0.3, 1.7), ScalarField::gaussian_well(2.0, 0.8)};
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(ScalarField, GradientMatchesFiniteDifferences) {
  RngStream rng(17, 0);
  const double h = 1e-5;
  for (const auto& f : catalog()) {
    for (std::size_t d : {1u, 2u, 3u}) {
      for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> x(d), g(d);
        for (double& v : x) v = 1.5 * rng.next_normal();
        f.gradient(x, g);
        for (std::size_t k = 0; k < d; ++k) {
          auto xp = x, xm = x;
          xp[k] += h;
          xm[k] -= h;
          const double fd = (f.value(xp) - f.value(xm)) / (2.0 * h);
          EXPECT_LT(rel_err(g[k], fd), 1e-5) << f.name() << " d=" << d;
        }
      }
    }
  }
}

TEST(ScalarField, HessianMatchesGradientDifferencesAndIsSymmetric) {
  RngStream rng(18, 0);
  const double h = 1e-5;
  for (const auto& f : catalog()) {
    const std::size_t d = 3;
    std::vector<double> x(d);
    for (double& v : x) v = rng.next_normal();
    const Eigen::MatrixXd H = f.hessian(x);
    EXPECT_LT((H - H.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    for (std::size_t k = 0; k < d; ++k) {
      auto xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      std::vector<double> gp(d), gm(d);
      f.gradient(xp, gp);
      f.gradient(xm, gm);
      for (std::size_t j = 0; j < d; ++j)
        EXPECT_LT(rel_err(H(j, k), (gp[j] - gm[j]) / (2.0 * h)), 1e-5) << f.name();
    }
  }
}

TEST(ScalarField, CatalogValues) {
  const std::vector<double> x{1.0, 2.0};
  EXPECT_DOUBLE_EQ(ScalarField::quadratic(2.0, 1.0, 3.0).value(x), 2.0 * 5.0 + 3.0 + 3.0);
  EXPECT_DOUBLE_EQ(ScalarField::cosine(0.5, 1.0).value(x), 0.5 * (std::cos(1.0) + std::cos(2.0)));
  EXPECT_DOUBLE_EQ(ScalarField::gaussian_well(2.0, 1.0).value(x), -2.0 * std::exp(-2.5));
  EXPECT_EQ(ScalarField::zero().value(x), 0.0);
}

TEST(Convolution, MomentPathMatchesDirectSum) {
  RngStream rng(19, 0);
  const std::size_t n = 40, d = 2;
  std::vector<double> pts(n * d);
  for (double& v : pts) v = rng.next_normal();
  const MeasureView mu{d, pts, {}};
  for (const auto& f : catalog()) {
    const Convolution conv(f, mu);
    const std::vector<double> x{0.3, -0.7};
    double direct = 0.0, self = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> z{x[0] - pts[2 * i], x[1] - pts[2 * i + 1]};
      direct += f.value(z) / n;
      for (std::size_t j = 0; j < n; ++j) {
        const std::vector<double> y{pts[2 * i] - pts[2 * j], pts[2 * i + 1] - pts[2 * j + 1]};
        self += f.value(y) / (n * n);
      }
    }
    EXPECT_NEAR(conv.value(x), direct, 1e-12 * std::max(1.0, std::abs(direct))) << f.name();
    EXPECT_NEAR(conv.self_energy(), self, 1e-11 * std::max(1.0, std::abs(self))) << f.name();
  }
}

TEST(VectorField, LinearSine) {
  const auto f = VectorField::linear_sine(2.0, 0.5, 3.0);
  const std::vector<double> v{0.1, -0.4};
  std::vector<double> out(2);
  f.apply(v, out);
  EXPECT_DOUBLE_EQ(out[0], 0.2 + 0.5 * std::sin(0.3));
  EXPECT_DOUBLE_EQ(out[1], -0.8 + 0.5 * std::sin(-1.2));
  std::vector<double> acc{1.0, 1.0};
  f.add(v, -2.0, acc);
  EXPECT_DOUBLE_EQ(acc[0], 1.0 - 2.0 * out[0]);
  EXPECT_TRUE(VectorField::linear(1.0).is_linear());
  EXPECT_TRUE(VectorField::zero().is_zero());
}

TEST(KBodyPotential, PairwiseSumValue) {
  const auto w = KBodyPotential::pairwise_sum(3, 2.0, ScalarField::quadratic(0.5, 0.0, 0.0));
  const std::vector<double> pts{0.0, 1.0, 3.0};
  // 2·½·(1 + 9 + 4)
  EXPECT_DOUBLE_EQ(w.value(pts, 1), 14.0);
  std::vector<double> g(1);
  w.grad_first(pts, 1, g);
  EXPECT_DOUBLE_EQ(g[0], 2.0 * ((0.0 - 1.0) + (0.0 - 3.0)));
}

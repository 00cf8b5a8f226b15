#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "mflang/error.hpp"
#include "mflang/measures.hpp"

using namespace mflang;

TEST(EmpiricalMeasure, RejectsBadInput) {
  EXPECT_THROW(EmpiricalMeasure(1, {}), InputError);
  EXPECT_THROW(EmpiricalMeasure(2, {1.0, 2.0, 3.0}), InputError);
  EXPECT_THROW(EmpiricalMeasure::line({0.0, NAN}), InputError);
  EXPECT_THROW(EmpiricalMeasure(0, {1.0}), InputError);
}

TEST(EmpiricalMeasure, IntegrateIsAverage) {
  const auto mu = EmpiricalMeasure::line({1.0, 2.0, 6.0});
  EXPECT_DOUBLE_EQ(mu.integrate([](auto x) { return x[0] * x[0]; }), (1.0 + 4.0 + 36.0) / 3.0);
}

TEST(SecondMoment, Examples) {
  EXPECT_EQ(second_moment(EmpiricalMeasure::line({0.0})), 0.0);
  EXPECT_EQ(second_moment(EmpiricalMeasure::line({-1.0, 1.0})), 1.0);
  EXPECT_EQ(second_moment(EmpiricalMeasure(2, {1.0, 2.0, 3.0, 4.0})), 15.0);
}

TEST(SecondMoment, PermutationInvariant) {
  RngStream rng(3, 0);
  std::vector<double> xs(50);
  for (double& x : xs) x = rng.next_normal();
  const double m = second_moment(EmpiricalMeasure::line(xs));
  std::reverse(xs.begin(), xs.end());
  std::rotate(xs.begin(), xs.begin() + 17, xs.end());
  EXPECT_NEAR(second_moment(EmpiricalMeasure::line(xs)), m, 1e-14);
}

TEST(SampleGaussianCloud, DegenerateSd) {
  RngStream rng(0, 0);
  const std::vector<double> mean{0.0};
  const auto mu = sample_gaussian_cloud(3, 1, mean, 0.0, rng);
  for (double x : mu.coords()) EXPECT_EQ(x, 0.0);
}

TEST(SampleGaussianCloud, SecondMomentNearOne) {
  RngStream rng(1, 0);
  const std::vector<double> mean{0.0};
  EXPECT_NEAR(second_moment(sample_gaussian_cloud(10000, 1, mean, 1.0, rng)), 1.0, 0.05);
}

TEST(SampleGaussianCloud, Deterministic) {
  RngStream a(8, 2), b(8, 2);
  const std::vector<double> mean{1.0, -1.0};
  EXPECT_EQ(sample_gaussian_cloud(20, 2, mean, 0.5, a), sample_gaussian_cloud(20, 2, mean, 0.5, b));
}

TEST(SampleGaussianCloud, RejectsNegativeSd) {
  RngStream rng(0, 0);
  EXPECT_THROW(sample_gaussian_cloud(3, 1, {}, -1.0, rng), InputError);
}

TEST(GridMeasure, RejectsBadGrid) {
  EXPECT_THROW(GridMeasure1D(1.0, 0.0, {1.0, 1.0, 1.0}), InputError);
  EXPECT_THROW(GridMeasure1D(0.0, 1.0, {1.0, 1.0}), InputError);
  EXPECT_THROW(GridMeasure1D(0.0, 1.0, {1.0, -1.0, 1.0}), InputError);
}

TEST(GridNormalize, ConstantDensity) {
  const auto g = grid_normalize(GridMeasure1D(0.0, 1.0, std::vector<double>(11, 2.0)));
  for (double v : g.density()) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST(GridNormalize, GaussianAgainstErf) {
  const auto raw = GridMeasure1D::sample(-8.0, 8.0, 1601, [](double x) { return std::exp(-0.5 * x * x); });
  const auto g = grid_normalize(raw);
  EXPECT_NEAR(g.mass(), 1.0, 1e-12);
  const auto it = std::max_element(g.density().begin(), g.density().end());
  EXPECT_NEAR(g.node(static_cast<std::size_t>(it - g.density().begin())), 0.0, 1e-12);
  // Exact normalizer √(2π)·erf(8/√2); trapezoid is spectrally accurate here.
  const double z = std::sqrt(2.0 * std::numbers::pi) * boost::math::erf(8.0 / std::sqrt(2.0));
  EXPECT_NEAR(g.density()[800], 1.0 / z, 1e-12);
}

TEST(GridNormalize, NegativeEntryRejected) {
  EXPECT_THROW(grid_normalize(GridMeasure1D(0.0, 1.0, {1.0, -1.0, 1.0})), InputError);
}

TEST(GridNormalize, Idempotent) {
  const auto g = grid_normalize(GridMeasure1D::sample(-5.0, 5.0, 501, [](double x) { return 1.0 + std::sin(x) * 0.5; }));
  const auto h = grid_normalize(g);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g.density()[i], h.density()[i], 1e-15);
}

TEST(GridNormalize, ZeroDensityRejected) {
  EXPECT_THROW(grid_normalize(GridMeasure1D(0.0, 1.0, {0.0, 0.0, 0.0})), InputError);
}

TEST(QuantilePoints, UniformGrid) {
  const auto q = quantile_points(GridMeasure1D(0.0, 1.0, std::vector<double>(101, 1.0)), 4);
  const double expect[] = {0.125, 0.375, 0.625, 0.875};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(q.coords()[i], expect[i], 1e-12);
}

TEST(QuadraturePoints, WeightsSumToMass) {
  const auto g = GridMeasure1D(0.0, 2.0, std::vector<double>(21, 0.5));
  const auto w = quadrature_points(g);
  double s = 0.0;
  for (double x : w.weights) s += x;
  EXPECT_NEAR(s, 1.0, 1e-14);
}

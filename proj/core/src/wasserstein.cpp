#include "mflang/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mflang/error.hpp"

namespace mflang {

namespace {

void require_same_size(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const char* who) {
  if (mu.size() != nu.size())
    throw InputError(std::string(who) + ": clouds must have equal size (" + std::to_string(mu.size()) + " vs " +
                     std::to_string(nu.size()) + ")");
  if (mu.dim() != nu.dim()) throw InputError(std::string(who) + ": dimension mismatch");
}

}  // namespace

double wp_empirical_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int p) {
  if (mu.dim() != 1 || nu.dim() != 1) throw InputError("wp_empirical_1d: clouds must be one-dimensional");
  require_same_size(mu, nu, "wp_empirical_1d");
  if (p != 1 && p != 2) throw InputError("wp_empirical_1d: p must be 1 or 2");
  std::vector<double> a(mu.coords().begin(), mu.coords().end());
  std::vector<double> b(nu.coords().begin(), nu.coords().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double gap = std::abs(a[i] - b[i]);
    sum += p == 1 ? gap : gap * gap;
  }
  sum /= static_cast<double>(a.size());
  return p == 1 ? sum : std::sqrt(sum);
}

TransportPlanResult w2_empirical_assignment(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  require_same_size(mu, nu, "w2_empirical_assignment");
  const std::size_t n = mu.size();
  const std::size_t d = mu.dim();
  if (n > kAssignmentCap)
    throw InputError("w2_empirical_assignment: n = " + std::to_string(n) + " exceeds the cap " +
                     std::to_string(kAssignmentCap));

  // Hungarian method with potentials (1-based, column 0 is a sentinel).
  // Rows are computed on demand so memory stays O(n).
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1), row(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  auto fill_row = [&](std::size_t i) {
    const auto x = mu.point(i - 1);
    for (std::size_t j = 1; j <= n; ++j) {
      const auto y = nu.point(j - 1);
      double c = 0.0;
      for (std::size_t k = 0; k < d; ++k) c += (x[k] - y[k]) * (x[k] - y[k]);
      row[j] = c;
    }
  };

  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      fill_row(i0);
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  TransportPlanResult result;
  result.assignment.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) result.assignment[match[j] - 1] = j - 1;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = mu.point(i);
    const auto y = nu.point(result.assignment[i]);
    for (std::size_t k = 0; k < d; ++k) total += (x[k] - y[k]) * (x[k] - y[k]);
  }
  result.cost = total / static_cast<double>(n);
  return result;
}

double w2_squared(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.dim() == 1 && nu.dim() == 1) {
    const double w = wp_empirical_1d(mu, nu, 2);
    return w * w;
  }
  return w2_empirical_assignment(mu, nu).cost;
}

double w1_grid(const GridMeasure1D& mu, const GridMeasure1D& nu) {
  if (!mu.same_grid(nu)) throw InputError("w1_grid: measures must share the same grid");
  const auto fa = mu.cdf();
  const auto fb = nu.cdf();
  const double ma = fa.back(), mb = fb.back();
  if (!(ma > 0.0) || !(mb > 0.0)) throw InputError("w1_grid: zero-mass density");
  const double h = mu.spacing();
  double sum = 0.0;
  double prev = std::abs(fa[0] / ma - fb[0] / mb);
  for (std::size_t i = 1; i < fa.size(); ++i) {
    const double cur = std::abs(fa[i] / ma - fb[i] / mb);
    sum += 0.5 * h * (prev + cur);
    prev = cur;
  }
  return sum;
}

double delta_d(std::size_t n, std::size_t d) {
  if (n == 0 || d == 0) throw InputError("delta_d: need n >= 1 and d >= 1");
  const double nn = static_cast<double>(n);
  if (d < 4) return 1.0 / std::sqrt(nn);
  if (d == 4) return std::log(nn + 1.0) / std::sqrt(nn);
  return std::pow(nn, -2.0 / static_cast<double>(d));
}

}  // namespace mflang

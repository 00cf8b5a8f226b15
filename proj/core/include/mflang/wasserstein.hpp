#pragma once

#include <cstddef>
#include <vector>

#include "mflang/measures.hpp"

namespace mflang {

struct TransportPlanResult {
  double cost = 0.0;                    // W₂² = (1/n) Σ ‖x_i − y_{σ(i)}‖²
  std::vector<std::size_t> assignment;  // σ: index in mu -> index in nu
};

/// Largest n accepted by w2_empirical_assignment.
inline constexpr std::size_t kAssignmentCap = 4096;

/// W_p between equal-size clouds on the line, p ∈ {1, 2}, by sorting.
double wp_empirical_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int p);

/// Exact W₂² between equal-size clouds in any dimension via an O(n³)
/// shortest-augmenting-path assignment on squared distances.
TransportPlanResult w2_empirical_assignment(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// W₂² between equal-size clouds: sorting for d = 1, assignment otherwise.
double w2_squared(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// ∫|F_μ − F_ν| on a shared grid; both densities are normalized first.
double w1_grid(const GridMeasure1D& mu, const GridMeasure1D& nu);

/// Fournier–Guillin rate: n^{-1/2} (d < 4), ln(n+1)/√n (d = 4), n^{-2/d} (d > 4).
double delta_d(std::size_t n, std::size_t d);

}  // namespace mflang

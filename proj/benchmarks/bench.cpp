#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mflang/dynamics.hpp"
#include "mflang/energy.hpp"
#include "mflang/gibbs.hpp"
#include "mflang/rng.hpp"
#include "mflang/wasserstein.hpp"

using namespace mflang;

namespace {

EnergySpec cosine_energy() {
  return EnergySpec(TwoBody{ScalarField::quadratic(2.0, 0.0, 0.0), ScalarField::cosine(0.1, 1.0)});
}

EmpiricalMeasure cloud(std::size_t n, std::size_t d, std::uint64_t stream) {
  RngStream rng(7, stream);
  const std::vector<double> mean(d, 0.0);
  return sample_gaussian_cloud(n, d, mean, 1.0, rng);
}

void BM_OverdampedStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto spec = cosine_energy();
  const auto x = cloud(n, 1, 0);
  std::vector<double> noise(n), out(n);
  RngStream rng(7, 1);
  for (double& v : noise) v = rng.next_normal();
  for (auto _ : state) {
    overdamped_update(spec, 1, x.coords(), 1e-3, noise, out, 0);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_OverdampedStep)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

void BM_KineticStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto spec = cosine_energy();
  const KineticFields fields;
  const auto p = cloud(n, 1, 2), v = cloud(n, 1, 3);
  std::vector<double> noise(n), po(n), vo(n);
  RngStream rng(7, 4);
  for (double& z : noise) z = rng.next_normal();
  for (auto _ : state) {
    kinetic_update(fields, spec, 1, p.coords(), v.coords(), 1e-3, noise, po, vo, 0);
    benchmark::DoNotOptimize(vo.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KineticStep)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

void BM_Assignment(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = cloud(n, 2, 5), b = cloud(n, 2, 6);
  for (auto _ : state) benchmark::DoNotOptimize(w2_empirical_assignment(a, b).cost);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Assignment)->RangeMultiplier(2)->Range(32, 512)->Complexity(benchmark::oNCubed);

void BM_Sorted1d(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = cloud(n, 1, 7), b = cloud(n, 1, 8);
  for (auto _ : state) benchmark::DoNotOptimize(w2_squared(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Sorted1d)->RangeMultiplier(4)->Range(256, 65536)->Complexity(benchmark::oNLogN);

void BM_GibbsMap(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto spec = cosine_energy();
  const auto mu = GridMeasure1D::sample(-10.0, 10.0, m, [](double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  });
  for (auto _ : state) benchmark::DoNotOptimize(gibbs_map(spec, mu).density().data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GibbsMap)->Arg(501)->Arg(1001)->Arg(2001)->Arg(4001)->Complexity();

}  // namespace

BENCHMARK_MAIN();

#include "lrf/nonlin_fit.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

struct Samples {
  Eigen::VectorXd z, zdot, f;
};

Samples synthetic(Eigen::Index n) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Samples s{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    s.z(i) = 0.08 * g(rng);
    s.zdot(i) = 0.5 * g(rng);
    s.f(i) = -5.0 * s.z(i) + 1000.0 * s.z(i) * s.z(i) * s.z(i) + 0.05 * g(rng);
  }
  return s;
}

void BM_BlrFit(benchmark::State& state) {
  const auto s = synthetic(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(lrf::blr_fit(s.z, s.f, 3));
}
BENCHMARK(BM_BlrFit)->Arg(12566)->Arg(628300)->Unit(benchmark::kMillisecond);

// Order scan over 50 extracted trajectories of the Duffing record.
void BM_BicScan(benchmark::State& state) {
  const auto s = synthetic(state.range(0));
  lrf::BlrOptions opts;
  opts.replicates = 50;
  for (auto _ : state) benchmark::DoNotOptimize(lrf::bic_scan(s.z, s.f, 9, opts, s.zdot));
}
BENCHMARK(BM_BicScan)->Arg(628300)->Unit(benchmark::kMillisecond);

}  // namespace

#include "lrf/lgssm.hpp"
#include "lrf/model_builder.hpp"
#include "lrf/simulate.hpp"
#include "lrf/sqrt_filter.hpp"

#include <benchmark/benchmark.h>

namespace {

lrf::ModelParameters duffing_params() {
  lrf::ModelParameters p;
  p[lrf::Param::Mass] = 1.0;
  p[lrf::Param::Damping] = 0.4;
  p[lrf::Param::Stiffness] = 105.0;
  p[lrf::Param::SignalVariance] = 0.5;
  p[lrf::Param::LengthScale] = 0.1;
  p[lrf::Param::NoiseVariance] = 0.05;
  return p;
}

struct Data {
  Eigen::MatrixXd y, u;
};

Data duffing_data(long n) {
  lrf::ExcitationSpec ex;
  ex.n_samples = n;
  const Eigen::VectorXd u = 1.6 * lrf::jonswap_multisine(ex);
  const lrf::PolynomialOde ode{1.0, 0.4, 100.0, {{3, 0, 1000.0}}};
  const auto r = lrf::newmark_simulate(ode, u, 0.01);
  return {lrf::add_measurement_noise(r.zdd, 0.2, 2).transpose(), u.transpose()};
}

void BM_LogLikelihood(benchmark::State& state) {
  const auto data = duffing_data(state.range(0));
  lrf::LatentForceModelSpec spec;
  spec.smoothness = state.range(1) == 1 ? lrf::Smoothness::Half : lrf::Smoothness::ThreeHalves;
  const auto lfm = lrf::build_latent_force_model(spec, duffing_params());
  for (auto _ : state) {
    benchmark::DoNotOptimize(lrf::kalman_log_likelihood(lfm.model, data.y, data.u, lfm.obs_noise, lfm.init));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogLikelihood)->Args({12566, 1})->Args({12566, 3})->Unit(benchmark::kMillisecond);

void BM_FilterAndSmoother(benchmark::State& state) {
  const auto data = duffing_data(state.range(0));
  const auto lfm = lrf::build_latent_force_model({}, duffing_params());
  for (auto _ : state) {
    const auto f = lrf::sqrt_kalman_filter(lfm.model, data.y, data.u, lfm.obs_noise, lfm.init);
    benchmark::DoNotOptimize(lrf::sqrt_rts_smoother(lfm.model, data.u, f.trajectory));
  }
}
BENCHMARK(BM_FilterAndSmoother)->Arg(12566)->Unit(benchmark::kMillisecond);

void BM_Discretize(benchmark::State& state) {
  lrf::LatentForceModelSpec spec;
  spec.smoothness = lrf::Smoothness::ThreeHalves;
  const auto p = duffing_params();
  for (auto _ : state) benchmark::DoNotOptimize(lrf::build_latent_force_model(spec, p));
}
BENCHMARK(BM_Discretize);

}  // namespace

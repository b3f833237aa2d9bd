#pragma once

// Assembles the discretized latent-restoring-force model (oscillator + GP
// force states + sensor row) from one parameter vector.

#include "lrf/gp_kernels.hpp"
#include "lrf/lgssm.hpp"
#include "lrf/sqrt_filter.hpp"

#include <array>
#include <cstddef>
#include <string_view>

namespace lrf {

/// Order used everywhere parameters are stored as a flat vector.
enum class Param : std::size_t { Mass = 0, Damping, Stiffness, SignalVariance, LengthScale, NoiseVariance };

inline constexpr std::size_t kNumParams = 6;
inline constexpr std::array<std::string_view, kNumParams> kParamNames = {"m",        "c",   "k",
                                                                         "sigma_f2", "ell", "R"};

struct ModelParameters {
  std::array<double, kNumParams> values{1.0, 0.0, 1.0, 1.0, 1.0, 1.0};

  double& operator[](Param p) { return values[static_cast<std::size_t>(p)]; }
  double operator[](Param p) const { return values[static_cast<std::size_t>(p)]; }

  /// m, k, sigma_f2, ell, R strictly positive and c non-negative.
  bool in_support() const;
  SdofParams sdof() const;
};

struct LatentForceModelSpec {
  ObservationMode observation = ObservationMode::Acceleration;
  Smoothness smoothness = Smoothness::Half;
  double dt = 0.01;
  /// Prior standard deviation of the displacement and velocity at t = 0.
  double physical_initial_std = 1e3;
};

struct LatentForceModel {
  DiscreteStateSpace model;
  GaussianBelief init;
  Eigen::MatrixXd obs_noise;
  /// Index of the state holding the GP force value.
  Eigen::Index force_index = 2;
};

LatentForceModel build_latent_force_model(const LatentForceModelSpec& spec,
                                          const ModelParameters& params);

}  // namespace lrf

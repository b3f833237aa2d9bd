#include "lrf/model_builder.hpp"

#include "lrf/errors.hpp"

#include <cmath>

namespace lrf {

bool ModelParameters::in_support() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  const auto& p = *this;
  return p[Param::Mass] > 0.0 && p[Param::Stiffness] > 0.0 && p[Param::Damping] >= 0.0 &&
         p[Param::SignalVariance] > 0.0 && p[Param::LengthScale] > 0.0 &&
         p[Param::NoiseVariance] > 0.0;
}

SdofParams ModelParameters::sdof() const {
  return SdofParams{(*this)[Param::Mass], (*this)[Param::Stiffness], (*this)[Param::Damping]};
}

LatentForceModel build_latent_force_model(const LatentForceModelSpec& spec,
                                          const ModelParameters& params) {
  if (!params.in_support()) throw InvalidArgument("model parameters outside their support");
  const KernelSpec kernel{spec.smoothness, params[Param::SignalVariance],
                          params[Param::LengthScale]};
  const GpSde gp = matern_to_sde(kernel);
  const ContinuousStateSpace continuous =
      build_observation(augment(build_sdof(params.sdof()), gp), spec.observation);

  LatentForceModel out;
  out.model = discretize(continuous, spec.dt);
  const Eigen::Index n = continuous.state_dim();
  const Eigen::Index d = gp.F.rows();

  out.init.mean = Eigen::VectorXd::Zero(n);
  out.init.sqrt_cov = Eigen::MatrixXd::Zero(n, n);
  out.init.sqrt_cov(0, 0) = spec.physical_initial_std;
  out.init.sqrt_cov(1, 1) = spec.physical_initial_std;
  Eigen::LLT<Eigen::MatrixXd> llt(gp.P_inf);
  out.init.sqrt_cov.bottomRightCorner(d, d) = llt.matrixU();

  out.obs_noise = Eigen::MatrixXd::Constant(1, 1, params[Param::NoiseVariance]);
  out.force_index = 2;
  return out;
}

}  // namespace lrf

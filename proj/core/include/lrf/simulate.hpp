#pragma once

// Ground-truth generation: Newmark-beta integration of polynomial SDOF
// oscillators, JONSWAP random-phase multisine forcing and measurement noise.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace lrf {

struct NonlinearTerm {
  int z_degree = 3;
  int zdot_degree = 0;
  double coefficient = 0.0;
};

/// m z'' + c z' + k z + sum_i a_i z^p_i z'^q_i = u(t)
struct PolynomialOde {
  double m = 1.0;
  double c = 0.0;
  double k = 1.0;
  std::vector<NonlinearTerm> nl_terms;

  void validate() const;
  /// c z' + k z + nonlinear terms.
  double restoring_force(double z, double zdot) const;
  double nonlinear_force(double z, double zdot) const;
};

struct ExcitationSpec {
  double Hs = 2.5;        ///< significant wave height
  double Tp = 1.0;        ///< peak period, s
  int n_freq = 1000;
  double fs = 100.0;      ///< sample rate, Hz
  long n_samples = 12566;
  std::uint64_t seed = 1;
  double gamma_peak = 3.3;
  double f_low_factor = 0.2;   ///< support starts at f_low_factor / Tp
  double f_high_factor = 5.0;  ///< and ends at f_high_factor / Tp

  void validate() const;
};

/// One-sided JONSWAP density in Hz for the given spec parameters.
double jonswap_density(double f, double Hs, double Tp, double gamma_peak);

/// Sum of n_freq cosines at frequencies drawn uniformly on the support,
/// amplitudes sqrt(2 S(f) df) with df = support width / n_freq, uniform phases.
Eigen::VectorXd jonswap_multisine(const ExcitationSpec& spec);

struct NewmarkOptions {
  double gamma = 0.5;
  double beta = 0.25;
  double newton_tol = 1e-12;
  int max_newton_iterations = 50;
};

struct Response {
  Eigen::VectorXd z;
  Eigen::VectorXd zdot;
  Eigen::VectorXd zdd;
};

/// Implicit Newmark-beta; each step's nonlinear equilibrium solved by Newton.
/// Throws NumericalError naming the step when Newton fails to converge.
Response newmark_simulate(const PolynomialOde& ode, const Eigen::VectorXd& u, double dt,
                          double z0 = 0.0, double zdot0 = 0.0, const NewmarkOptions& options = {});

/// Forward simulation of an identified model (same integrator).
Response simulate_identified(const PolynomialOde& ode, const Eigen::VectorXd& u, double dt,
                             double z0 = 0.0, double zdot0 = 0.0);

/// signal + N(0, noise_std^2) i.i.d.
Eigen::VectorXd add_measurement_noise(const Eigen::VectorXd& signal, double noise_std,
                                      std::uint64_t seed);

}  // namespace lrf

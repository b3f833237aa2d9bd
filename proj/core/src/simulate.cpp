#include "lrf/simulate.hpp"

#include "lrf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace lrf {

namespace {

double ipow(double x, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

}  // namespace

void PolynomialOde::validate() const {
  if (!(m > 0.0) || !std::isfinite(m)) throw InvalidArgument("ODE mass must be positive");
  if (!std::isfinite(c) || !std::isfinite(k)) throw InvalidArgument("ODE coefficients must be finite");
  for (const auto& t : nl_terms) {
    if (t.z_degree < 0 || t.zdot_degree < 0 || !std::isfinite(t.coefficient)) {
      throw InvalidArgument("invalid nonlinear term");
    }
  }
}

double PolynomialOde::nonlinear_force(double z, double zdot) const {
  double f = 0.0;
  for (const auto& t : nl_terms) f += t.coefficient * ipow(z, t.z_degree) * ipow(zdot, t.zdot_degree);
  return f;
}

double PolynomialOde::restoring_force(double z, double zdot) const {
  return c * zdot + k * z + nonlinear_force(z, zdot);
}

void ExcitationSpec::validate() const {
  if (!(fs > 0.0)) throw InvalidArgument("excitation sample rate must be positive");
  if (n_freq < 1) throw InvalidArgument("excitation needs at least one frequency");
  if (n_samples < 0) throw InvalidArgument("excitation length must be non-negative");
  if (!(Hs >= 0.0)) throw InvalidArgument("significant wave height must be non-negative");
  if (!(Tp > 0.0)) throw InvalidArgument("peak period must be positive");
  if (!(gamma_peak >= 1.0)) throw InvalidArgument("peak enhancement must be >= 1");
  if (!(f_low_factor > 0.0) || !(f_high_factor > f_low_factor)) {
    throw InvalidArgument("invalid frequency support");
  }
}

double jonswap_density(double f, double Hs, double Tp, double gamma_peak) {
  if (f <= 0.0 || Hs == 0.0) return 0.0;
  const double fp = 1.0 / Tp;
  const double sigma = f <= fp ? 0.07 : 0.09;
  const double r = std::exp(-(f - fp) * (f - fp) / (2.0 * sigma * sigma * fp * fp));
  const double normalization = 1.0 - 0.287 * std::log(gamma_peak);
  const double ratio = fp / f;
  return normalization * (5.0 / 16.0) * Hs * Hs * std::pow(fp, 4) / std::pow(f, 5) *
         std::exp(-1.25 * ratio * ratio * ratio * ratio) * std::pow(gamma_peak, r);
}

Eigen::VectorXd jonswap_multisine(const ExcitationSpec& spec) {
  spec.validate();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(spec.n_samples);
  const double f_lo = spec.f_low_factor / spec.Tp;
  const double f_hi = spec.f_high_factor / spec.Tp;
  const double df = (f_hi - f_lo) / spec.n_freq;

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> freq_dist(f_lo, f_hi);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::vector<double> freqs(spec.n_freq);
  std::vector<double> phases(spec.n_freq);
  for (int i = 0; i < spec.n_freq; ++i) freqs[i] = freq_dist(rng);
  std::sort(freqs.begin(), freqs.end());
  for (int i = 0; i < spec.n_freq; ++i) phases[i] = phase_dist(rng);

  if (spec.Hs == 0.0) return out;
  const double dt = 1.0 / spec.fs;
  for (int i = 0; i < spec.n_freq; ++i) {
    const double amp = std::sqrt(2.0 * jonswap_density(freqs[i], spec.Hs, spec.Tp, spec.gamma_peak) * df);
    const double w = 2.0 * std::numbers::pi * freqs[i];
    for (long n = 0; n < spec.n_samples; ++n) {
      out(n) += amp * std::cos(w * static_cast<double>(n) * dt + phases[i]);
    }
  }
  return out;
}

Response newmark_simulate(const PolynomialOde& ode, const Eigen::VectorXd& u, double dt, double z0,
                          double zdot0, const NewmarkOptions& options) {
  ode.validate();
  if (!(dt > 0.0)) throw InvalidArgument("newmark: dt must be positive");
  const double g = options.gamma;
  const double b = options.beta;
  if (!(g >= 0.5) || !(2.0 * b >= g)) {
    throw InvalidArgument("newmark: parameters outside the unconditionally stable range");
  }
  const Eigen::Index N = u.size();
  Response r;
  r.z.resize(N);
  r.zdot.resize(N);
  r.zdd.resize(N);
  if (N == 0) return r;

  r.z(0) = z0;
  r.zdot(0) = zdot0;
  r.zdd(0) = (u(0) - ode.restoring_force(z0, zdot0)) / ode.m;

  const double a_coef = 1.0 / (b * dt * dt);  // d z''/d z
  const double v_coef = g / (b * dt);         // d z'/d z
  for (Eigen::Index n = 0; n + 1 < N; ++n) {
    const double zn = r.z(n), vn = r.zdot(n), an = r.zdd(n);
    const double z_pred = zn + dt * vn + dt * dt * (0.5 - b) * an;
    const double v_pred = vn + dt * (1.0 - g) * an;
    const double target = u(n + 1);

    double z = zn + dt * vn;  // explicit guess
    bool converged = false;
    for (int it = 0; it < options.max_newton_iterations; ++it) {
      const double acc = a_coef * (z - z_pred);
      const double vel = v_pred + g * dt * acc;
      const double residual = ode.m * acc + ode.restoring_force(z, vel) - target;
      const double scale = std::max({1.0, std::abs(target), std::abs(ode.m * acc)});
      if (std::abs(residual) <= options.newton_tol * scale) {
        converged = true;
        break;
      }
      // Tangent: m a_coef + c v_coef + k + d(nl)/dz + d(nl)/dz' v_coef
      double tangent = ode.m * a_coef + ode.c * v_coef + ode.k;
      for (const auto& t : ode.nl_terms) {
        if (t.z_degree > 0) {
          tangent += t.coefficient * t.z_degree * ipow(z, t.z_degree - 1) * ipow(vel, t.zdot_degree);
        }
        if (t.zdot_degree > 0) {
          tangent += t.coefficient * t.zdot_degree * ipow(z, t.z_degree) *
                     ipow(vel, t.zdot_degree - 1) * v_coef;
        }
      }
      const double step = residual / tangent;
      z -= step;
      if (!std::isfinite(z)) break;
      if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(z), 1e-300)) {
        // Stalled at round-off; accept if the residual is at round-off too.
        const double acc2 = a_coef * (z - z_pred);
        const double res2 = ode.m * acc2 + ode.restoring_force(z, v_pred + g * dt * acc2) - target;
        converged = std::abs(res2) <= 1e3 * options.newton_tol * scale;
        break;
      }
    }
    if (!converged) {
      throw NumericalError("Newmark Newton iteration failed to converge at step " +
                           std::to_string(n + 1));
    }
    r.z(n + 1) = z;
    r.zdd(n + 1) = a_coef * (z - z_pred);
    r.zdot(n + 1) = v_pred + g * dt * r.zdd(n + 1);
  }
  return r;
}

Response simulate_identified(const PolynomialOde& ode, const Eigen::VectorXd& u, double dt,
                             double z0, double zdot0) {
  return newmark_simulate(ode, u, dt, z0, zdot0);
}

Eigen::VectorXd add_measurement_noise(const Eigen::VectorXd& signal, double noise_std,
                                      std::uint64_t seed) {
  if (!(noise_std >= 0.0)) throw InvalidArgument("noise standard deviation must be non-negative");
  if (noise_std == 0.0) return signal;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, noise_std);
  Eigen::VectorXd out = signal;
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += normal(rng);
  return out;
}

}  // namespace lrf

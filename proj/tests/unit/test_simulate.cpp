#include "lrf/diagnostics.hpp"
#include "lrf/errors.hpp"
#include "lrf/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace lrf;

namespace {

double linear_energy(const Response& r, Eigen::Index i, double m, double k) {
  return 0.5 * m * r.zdot(i) * r.zdot(i) + 0.5 * k * r.z(i) * r.z(i);
}

}  // namespace

TEST(Jonswap, ZeroHeightGivesZeroSignal) {
  ExcitationSpec ex;
  ex.Hs = 0.0;
  ex.n_samples = 500;
  EXPECT_EQ(jonswap_multisine(ex), Eigen::VectorXd::Zero(500));
}

TEST(Jonswap, CaseStudyLengthAndDeterminism) {
  ExcitationSpec ex;  // Hs 2.5, Tp 1, 1000 frequencies, 100 Hz, 12566 samples
  const Eigen::VectorXd a = jonswap_multisine(ex);
  EXPECT_EQ(a.size(), 12566);
  EXPECT_EQ(a, jonswap_multisine(ex));
  ex.seed = 2;
  EXPECT_NE(a, jonswap_multisine(ex));
}

TEST(Jonswap, ZeroMeanOverLongRecords) {
  ExcitationSpec ex;
  ex.n_samples = 100000;
  ex.n_freq = 200;
  const Eigen::VectorXd u = jonswap_multisine(ex);
  const double mean = u.mean();
  const double sd = std::sqrt((u.array() - mean).square().mean());
  EXPECT_LT(std::abs(mean), 0.01 * sd);
}

TEST(Jonswap, VarianceMatchesSpectrumIntegral) {
  // Each cosine contributes S(f) df, so a single realisation's variance is a
  // Monte Carlo estimate of Hs^2 / 16 with a spread of several percent;
  // averaging over seeds tightens it.
  ExcitationSpec ex;
  ex.n_samples = 10000;
  double mean_var = 0.0;
  const int seeds = 20;
  for (int s = 1; s <= seeds; ++s) {
    ex.seed = static_cast<std::uint64_t>(s);
    const Eigen::VectorXd u = jonswap_multisine(ex);
    mean_var += (u.array() - u.mean()).square().mean() / seeds;
  }
  EXPECT_NEAR(mean_var, ex.Hs * ex.Hs / 16.0, 0.1 * ex.Hs * ex.Hs / 16.0);
}

TEST(Jonswap, DensityPeaksNearPeakFrequency) {
  double best_f = 0.0, best = 0.0;
  for (double f = 0.2; f < 5.0; f += 0.001) {
    const double s = jonswap_density(f, 2.5, 1.0, 3.3);
    if (s > best) {
      best = s;
      best_f = f;
    }
  }
  EXPECT_NEAR(best_f, 1.0, 0.01);
  EXPECT_EQ(jonswap_density(-1.0, 2.5, 1.0, 3.3), 0.0);
}

TEST(Newmark, ZeroForcingStaysAtRest) {
  const PolynomialOde ode{1.0, 0.4, 100.0, {{3, 0, 1000.0}}};
  const auto r = newmark_simulate(ode, Eigen::VectorXd::Zero(1000), 0.01);
  EXPECT_EQ(r.z.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.zdd.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Newmark, UndampedPeriod) {
  const PolynomialOde ode{1.0, 0.0, 100.0, {}};
  const double dt = 1e-3;
  const auto r = newmark_simulate(ode, Eigen::VectorXd::Zero(5000), dt, 1.0, 0.0);
  // Successive downward zero crossings, linearly interpolated.
  std::vector<double> crossings;
  for (Eigen::Index i = 0; i + 1 < r.z.size(); ++i) {
    if (r.z(i) > 0.0 && r.z(i + 1) <= 0.0) crossings.push_back((i + r.z(i) / (r.z(i) - r.z(i + 1))) * dt);
  }
  ASSERT_GE(crossings.size(), 5u);
  const double period = (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
  EXPECT_NEAR(period, 2.0 * std::numbers::pi / 10.0, 1e-3 * 0.62832);
}

TEST(Newmark, AverageAccelerationConservesEnergy) {
  const PolynomialOde ode{1.0, 0.0, 100.0, {}};
  const auto r = newmark_simulate(ode, Eigen::VectorXd::Zero(10001), 0.01, 0.5, 2.0);
  const double e0 = linear_energy(r, 0, 1.0, 100.0);
  double worst = 0.0;
  for (Eigen::Index i = 1; i < r.z.size(); ++i) worst = std::max(worst, std::abs(linear_energy(r, i, 1.0, 100.0) - e0));
  EXPECT_LT(worst / e0, 1e-6);
}

TEST(Newmark, SecondOrderConvergence) {
  const PolynomialOde ode{1.0, 0.0, 100.0, {}};
  const double t_end = 1.0;
  auto error_at = [&](double dt) {
    const auto n = static_cast<Eigen::Index>(std::llround(t_end / dt)) + 1;
    const auto r = newmark_simulate(ode, Eigen::VectorXd::Zero(n), dt, 1.0, 0.0);
    return std::abs(r.z(n - 1) - std::cos(10.0 * t_end));
  };
  const double e1 = error_at(0.01), e2 = error_at(0.005), e3 = error_at(0.0025);
  EXPECT_NEAR(e1 / e2, 4.0, 0.4);
  EXPECT_NEAR(e2 / e3, 4.0, 0.4);
}

TEST(Newmark, SatisfiesEquationOfMotion) {
  ExcitationSpec ex;
  ex.n_samples = 4000;
  const Eigen::VectorXd u = 1.6 * jonswap_multisine(ex);
  const PolynomialOde ode{1.0, 0.4, 100.0, {{3, 0, 1000.0}, {2, 1, 3.0}}};
  const auto r = newmark_simulate(ode, u, 0.01);
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double res = ode.m * r.zdd(i) + ode.restoring_force(r.z(i), r.zdot(i)) - u(i);
    EXPECT_LT(std::abs(res), 1e-8) << "step " << i;
  }
}

TEST(Newmark, RejectsInvalidSettings) {
  const PolynomialOde ode{1.0, 0.0, 1.0, {}};
  EXPECT_THROW(newmark_simulate(ode, Eigen::VectorXd::Zero(10), 0.0), InvalidArgument);
  NewmarkOptions opts;
  opts.beta = 0.1;
  EXPECT_THROW(newmark_simulate(ode, Eigen::VectorXd::Zero(10), 0.01, 0.0, 0.0, opts), InvalidArgument);
  EXPECT_THROW(newmark_simulate(PolynomialOde{0.0, 0.0, 1.0, {}}, Eigen::VectorXd::Zero(10), 0.01), InvalidArgument);
}

TEST(Newmark, ReportsNewtonFailureStep) {
  // A softening quintic drives the solution through the turning point.
  const PolynomialOde ode{1.0, 0.0, 1.0, {{5, 0, -1e6}}};
  Eigen::VectorXd u = Eigen::VectorXd::Constant(200, 50.0);
  try {
    newmark_simulate(ode, u, 0.05);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(SimulateIdentified, TrueModelReproducesTruth) {
  ExcitationSpec ex;
  ex.n_samples = 3000;
  const Eigen::VectorXd u = jonswap_multisine(ex);
  const PolynomialOde ode{1.0, 0.4, 100.0, {{3, 0, 1000.0}}};
  const auto truth = newmark_simulate(ode, u, 0.01);
  const auto sim = simulate_identified(ode, u, 0.01);
  EXPECT_LT(nmse(truth.z, sim.z), 1e-6);
}

TEST(MeasurementNoise, ZeroStdIsIdentity) {
  const Eigen::VectorXd s = Eigen::VectorXd::LinSpaced(10, 0.0, 1.0);
  EXPECT_EQ(add_measurement_noise(s, 0.0, 1), s);
  EXPECT_THROW(add_measurement_noise(s, -1.0, 1), InvalidArgument);
}

TEST(MeasurementNoise, EmpiricalVariance) {
  const double sd = std::sqrt(0.05);
  EXPECT_NEAR(sd, 0.22361, 1e-5);
  const Eigen::VectorXd clean = Eigen::VectorXd::Zero(100000);
  const Eigen::VectorXd noisy = add_measurement_noise(clean, sd, 7);
  const double var = (noisy - clean).squaredNorm() / 100000.0;
  EXPECT_NEAR(var, 0.05, 0.05 * 0.05);
  EXPECT_EQ(noisy, add_measurement_noise(clean, sd, 7));
}

TEST(PolynomialOde, ForceDecomposition) {
  const PolynomialOde ode{2.0, 0.5, 10.0, {{3, 0, 4.0}, {1, 1, -1.0}}};
  const double z = 0.3, v = -0.7;
  EXPECT_DOUBLE_EQ(ode.nonlinear_force(z, v), 4.0 * z * z * z - z * v);
  EXPECT_DOUBLE_EQ(ode.restoring_force(z, v), 0.5 * v + 10.0 * z + ode.nonlinear_force(z, v));
}

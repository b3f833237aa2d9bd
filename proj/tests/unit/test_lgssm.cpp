#include "lrf/errors.hpp"
#include "lrf/gp_kernels.hpp"
#include "lrf/lgssm.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace lrf;

namespace {

void expect_matrix_near(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) EXPECT_NEAR(a(i, j), b(i, j), tol) << "(" << i << "," << j << ")";
}

ContinuousStateSpace scalar_system(double a, double q) {
  ContinuousStateSpace s;
  s.A = Eigen::MatrixXd::Constant(1, 1, a);
  s.B = Eigen::MatrixXd::Zero(1, 1);
  s.L = Eigen::MatrixXd::Ones(1, 1);
  s.q = Eigen::MatrixXd::Constant(1, 1, q);
  s.C = Eigen::MatrixXd::Ones(1, 1);
  s.D = Eigen::MatrixXd::Zero(1, 1);
  return s;
}

}  // namespace

TEST(BuildSdof, CaseStudyOscillator) {
  const auto s = build_sdof({1.0, 100.0, 0.4});
  Eigen::Matrix2d A;
  A << 0, 1, -100, -0.4;
  expect_matrix_near(s.A, A, 0.0);
  expect_matrix_near(s.B, Eigen::Vector2d(0, 1), 0.0);
  EXPECT_EQ(s.L.size(), 0);
}

TEST(BuildSdof, UndampedUnitOscillator) {
  const auto s = build_sdof({1.0, 1.0, 0.0});
  Eigen::Matrix2d A;
  A << 0, 1, -1, 0;
  expect_matrix_near(s.A, A, 0.0);
}

TEST(BuildSdof, MassScaling) {
  const auto s = build_sdof({2.0, 8.0, 2.0});
  Eigen::Matrix2d A;
  A << 0, 1, -4, -1;
  expect_matrix_near(s.A, A, 0.0);
  expect_matrix_near(s.B, Eigen::Vector2d(0, 0.5), 0.0);
}

TEST(BuildSdof, RejectsNonPositiveMassOrStiffness) {
  EXPECT_THROW(build_sdof({0.0, 1.0, 0.0}), InvalidArgument);
  EXPECT_THROW(build_sdof({1.0, -1.0, 0.0}), InvalidArgument);
  EXPECT_THROW(build_sdof({1.0, 1.0, -0.1}), InvalidArgument);
}

TEST(Augment, MaternHalfBlocks) {
  const auto gp = matern_to_sde({Smoothness::Half, 1.0, 2.0});
  const auto s = augment(build_sdof({1.0, 100.0, 0.4}), gp);
  Eigen::Matrix3d A;
  A << 0, 1, 0, -100, -0.4, -1, 0, 0, -0.5;
  expect_matrix_near(s.A, A, 1e-15);
  expect_matrix_near(s.L, Eigen::Vector3d(0, 0, 1), 0.0);
  expect_matrix_near(s.B, Eigen::Vector3d(0, 1, 0), 0.0);
  EXPECT_DOUBLE_EQ(s.q(0, 0), gp.q);
}

TEST(Augment, MaternThreeHalvesDimension) {
  const auto s = augment(build_sdof({1.0, 100.0, 0.4}), matern_to_sde({Smoothness::ThreeHalves, 1.0, 1.0}));
  EXPECT_EQ(s.state_dim(), 4);
  expect_matrix_near(s.L, Eigen::Vector4d(0, 0, 0, 1), 0.0);
}

TEST(Augment, CouplingScalesWithInverseMass) {
  const auto s = augment(build_sdof({2.0, 8.0, 2.0}), matern_to_sde({Smoothness::Half, 1.0, 1.0}));
  EXPECT_DOUBLE_EQ(s.A(1, 2), -0.5);
}

TEST(Augment, PreservesOscillatorBlocks) {
  const auto base = build_sdof({1.7, 42.0, 0.9});
  const auto s = augment(base, matern_to_sde({Smoothness::ThreeHalves, 0.3, 0.4}));
  expect_matrix_near(s.A.topLeftCorner(2, 2), base.A, 0.0);
  expect_matrix_near(s.B.topRows(2), base.B, 0.0);
  expect_matrix_near(s.A.bottomLeftCorner(2, 2), Eigen::Matrix2d::Zero(), 0.0);
}

TEST(Observation, AccelerationRow) {
  const auto s = build_observation(augment(build_sdof({1.0, 100.0, 0.4}),
                                           matern_to_sde({Smoothness::Half, 1.0, 2.0})),
                                   ObservationMode::Acceleration);
  expect_matrix_near(s.C, Eigen::RowVector3d(-100, -0.4, -1), 1e-15);
  expect_matrix_near(s.D, Eigen::MatrixXd::Ones(1, 1), 0.0);
}

TEST(Observation, DisplacementAndVelocityRows) {
  const auto aug = augment(build_sdof({1.0, 100.0, 0.4}), matern_to_sde({Smoothness::Half, 1.0, 2.0}));
  const auto d = build_observation(aug, ObservationMode::Displacement);
  expect_matrix_near(d.C, Eigen::RowVector3d(1, 0, 0), 0.0);
  expect_matrix_near(d.D, Eigen::MatrixXd::Zero(1, 1), 0.0);
  const auto v = build_observation(aug, ObservationMode::Velocity);
  expect_matrix_near(v.C, Eigen::RowVector3d(0, 1, 0), 0.0);
  expect_matrix_near(v.D, Eigen::MatrixXd::Zero(1, 1), 0.0);
}

TEST(Observation, UnknownModeRejected) {
  EXPECT_THROW(parse_observation_mode("jerk"), InvalidArgument);
  EXPECT_EQ(parse_observation_mode("acceleration"), ObservationMode::Acceleration);
}

TEST(Observation, AccelerationRowReproducesEquationOfMotion) {
  // With the GP state set to the true nonlinear force, C x + D u must equal
  // (u - c z' - k z - f) / m.
  const double m = 1.3, k = 80.0, c = 0.7;
  const auto s = build_observation(augment(build_sdof({m, k, c}), matern_to_sde({Smoothness::Half, 1.0, 1.0})),
                                   ObservationMode::Acceleration);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 100; ++i) {
    const double z = g(rng), zd = g(rng), u = g(rng);
    const double f = 500.0 * z * z * z;
    const Eigen::Vector3d x(z, zd, f);
    const double acc = (s.C * x)(0) + s.D(0, 0) * u;
    EXPECT_NEAR(acc, (u - c * zd - k * z - f) / m, 1e-12 * (1.0 + std::abs(f)));
  }
}

TEST(Discretize, ZeroDynamics) {
  const auto d = discretize(scalar_system(0.0, 3.0), 0.1);
  EXPECT_NEAR(d.A(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(d.Q(0, 0), 0.3, 1e-14);
  EXPECT_DOUBLE_EQ(d.dt, 0.1);
}

TEST(Discretize, OrnsteinUhlenbeckClosedForm) {
  const auto gp = matern_to_sde({Smoothness::Half, 1.0, 2.0});
  const auto d = discretize(scalar_system(gp.F(0, 0), gp.q), 0.5);
  EXPECT_NEAR(d.A(0, 0), std::exp(-0.25), 1e-12);
  EXPECT_NEAR(d.Q(0, 0), 1.0 - std::exp(-0.5), 1e-12);
}

TEST(Discretize, FirstOrderExpansionAtSmallStep) {
  auto s = build_sdof({1.0, 100.0, 0.4});
  s.L = Eigen::MatrixXd::Zero(2, 1);
  s.q = Eigen::MatrixXd::Zero(1, 1);
  s.C = Eigen::RowVector2d(1, 0);
  s.D = Eigen::MatrixXd::Zero(1, 1);
  const double dt = 1e-4;
  const auto d = discretize(s, dt);
  expect_matrix_near(d.A, Eigen::Matrix2d::Identity() + s.A * dt, 1e-6);
}

TEST(Discretize, ZeroOrderHoldInput) {
  // Scalar x' = a x + b u: B_d = (e^{a dt} - 1) b / a.
  auto s = scalar_system(-2.0, 0.0);
  s.B(0, 0) = 3.0;
  const auto d = discretize(s, 0.2);
  EXPECT_NEAR(d.B(0, 0), (std::exp(-0.4) - 1.0) * 3.0 / -2.0, 1e-13);
}

TEST(Discretize, RejectsBadStep) {
  EXPECT_THROW(discretize(scalar_system(-1.0, 1.0), 0.0), InvalidArgument);
  EXPECT_THROW(discretize(scalar_system(-1.0, 1.0), -0.1), InvalidArgument);
  EXPECT_THROW(discretize(scalar_system(std::nan(""), 1.0), 0.1), NumericalError);
}

TEST(Discretize, SemigroupProperty) {
  const auto s = build_observation(augment(build_sdof({1.0, 100.0, 0.4}),
                                           matern_to_sde({Smoothness::ThreeHalves, 0.5, 0.3})),
                                   ObservationMode::Acceleration);
  for (double dt : {0.001, 0.01, 0.05}) {
    const auto full = discretize(s, dt);
    const auto half = discretize(s, dt / 2);
    expect_matrix_near(full.A, half.A * half.A, 1e-10);
    // Q(dt) = A(dt/2) Q(dt/2) A(dt/2)^T + Q(dt/2).
    const Eigen::MatrixXd q2 = half.A * half.Q * half.A.transpose() + half.Q;
    EXPECT_LE((full.Q - q2).norm(), 1e-10 * (1.0 + full.Q.norm()));
  }
}

TEST(Discretize, ProcessNoiseMatchesQuadratureOnRandomSystems) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    ContinuousStateSpace s;
    Eigen::MatrixXd A(4, 4);
    for (int i = 0; i < 16; ++i) A(i) = g(rng);
    const double shift = A.eigenvalues().real().maxCoeff() + 0.5;
    A -= shift * Eigen::MatrixXd::Identity(4, 4);
    s.A = A;
    s.B = Eigen::MatrixXd::Zero(4, 1);
    s.L = Eigen::MatrixXd(4, 2);
    for (int i = 0; i < 8; ++i) s.L(i) = g(rng);
    Eigen::MatrixXd G(2, 2);
    for (int i = 0; i < 4; ++i) G(i) = g(rng);
    s.q = G * G.transpose();
    s.C = Eigen::MatrixXd::Zero(1, 4);
    s.D = Eigen::MatrixXd::Zero(1, 1);
    const double dt = 0.3;
    const auto d = discretize(s, dt);
    const Eigen::MatrixXd ref = oracle::quadrature_process_noise(A, s.L * s.q * s.L.transpose(), dt, 4000);
    EXPECT_LE((d.Q - ref).norm() / ref.norm(), 1e-8) << "trial " << trial;
  }
}

TEST(Validate, CatchesDimensionAndPsdErrors) {
  auto s = scalar_system(-1.0, 1.0);
  EXPECT_NO_THROW(s.validate());
  s.q(0, 0) = -1.0;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = scalar_system(-1.0, 1.0);
  s.C = Eigen::MatrixXd::Ones(1, 2);
  EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(MatrixExponential, DiagonalAndNilpotent) {
  const Eigen::Vector3d d(-1.0, 0.5, 2.0);
  const Eigen::MatrixXd E = matrix_exponential(d.asDiagonal().toDenseMatrix());
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(E(i, i), std::exp(d(i)), 1e-13 * std::exp(d(i)));
  Eigen::Matrix2d N;
  N << 0, 3, 0, 0;
  Eigen::Matrix2d expected;
  expected << 1, 3, 0, 1;
  expect_matrix_near(matrix_exponential(N), expected, 1e-14);
}

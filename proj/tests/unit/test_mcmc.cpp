#include "lrf/errors.hpp"
#include "lrf/mcmc.hpp"
#include "lrf/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

using namespace lrf;

namespace {

IdentificationData small_duffing_data(int n) {
  ExcitationSpec ex;
  ex.n_samples = n;
  ex.seed = 21;
  const Eigen::VectorXd u = 1.6 * jonswap_multisine(ex);
  PolynomialOde ode{1.0, 0.4, 100.0, {{3, 0, 1000.0}}};
  const auto r = newmark_simulate(ode, u, 1.0 / ex.fs);
  IdentificationData d;
  d.u = u.transpose();
  d.y = add_measurement_noise(r.zdd, std::sqrt(0.05), 22).transpose();
  return d;
}

ModelParameters duffing_truth() {
  ModelParameters p;
  p[Param::Mass] = 1.0;
  p[Param::Damping] = 0.4;
  p[Param::Stiffness] = 100.0;
  p[Param::SignalVariance] = 0.5;
  p[Param::LengthScale] = 0.2;
  p[Param::NoiseVariance] = 0.05;
  return p;
}

}  // namespace

TEST(Priors, CaseStudyTables) {
  const auto d = duffing_priors();
  EXPECT_FALSE(d[Param::Mass].active);
  EXPECT_DOUBLE_EQ(d[Param::Mass].mean, 1.0);
  EXPECT_EQ(d.active_indices().size(), 5u);
  const auto s = silverbox_priors();
  EXPECT_EQ(s.active_indices().size(), 6u);
  EXPECT_NO_THROW(d.validate());
  EXPECT_NO_THROW(s.validate());
}

TEST(Priors, ExpandContractRoundTrip) {
  const auto pri = duffing_priors();
  const Eigen::VectorXd a = (Eigen::VectorXd(5) << 0.3, 90.0, 0.2, 0.15, 0.06).finished();
  const auto full = pri.expand(a);
  EXPECT_DOUBLE_EQ(full[Param::Mass], 1.0);
  EXPECT_EQ(pri.contract(full), a);
  EXPECT_THROW(pri.expand(Eigen::VectorXd::Ones(6)), InvalidArgument);
}

TEST(LogPosterior, NoDataGivesPriorAtMeans) {
  const auto pri = duffing_priors();
  IdentificationData empty{Eigen::MatrixXd(1, 0), Eigen::MatrixXd(1, 0)};
  double expected = 0.0;
  for (auto i : pri.active_indices()) expected += -0.5 * std::log(2.0 * std::numbers::pi * pri.priors[i].variance);
  EXPECT_NEAR(log_posterior(pri.at_means(), pri, LatentForceModelSpec{}, empty), expected, 1e-12);
}

TEST(LogPosterior, OutsideSupportIsMinusInfinity) {
  const auto pri = duffing_priors();
  IdentificationData empty{Eigen::MatrixXd(1, 0), Eigen::MatrixXd(1, 0)};
  auto p = pri.at_means();
  p[Param::Stiffness] = -1.0;
  EXPECT_EQ(log_posterior(p, pri, LatentForceModelSpec{}, empty), -std::numeric_limits<double>::infinity());
  p = pri.at_means();
  p[Param::NoiseVariance] = 0.0;
  EXPECT_EQ(log_posterior(p, pri, LatentForceModelSpec{}, empty), -std::numeric_limits<double>::infinity());
}

TEST(LogPosterior, FlatPriorDifferencesEqualLikelihoodDifferences) {
  const auto data = small_duffing_data(600);
  PriorSpec flat = duffing_priors();
  for (auto& pr : flat.priors) pr.variance = 1e30;
  const LatentForceModelSpec spec;
  const auto a = duffing_truth();
  auto b = a;
  b[Param::Stiffness] = 110.0;
  const double dpost = log_posterior(a, flat, spec, data) - log_posterior(b, flat, spec, data);
  const double dlik = log_likelihood(a, spec, data) - log_likelihood(b, spec, data);
  EXPECT_NEAR(dpost, dlik, 1e-6 * std::abs(dlik) + 1e-9);
}

TEST(LogPosterior, TruthBeatsDoubledStiffness) {
  const auto data = small_duffing_data(2000);
  const auto pri = duffing_priors();
  const auto a = duffing_truth();
  auto b = a;
  b[Param::Stiffness] = 200.0;
  EXPECT_GT(log_posterior(a, pri, LatentForceModelSpec{}, data), log_posterior(b, pri, LatentForceModelSpec{}, data));
}

TEST(MhSample, FlatTargetAcceptsEveryProposal) {
  const auto chain = mh_sample([](const Eigen::VectorXd&) { return 0.0; }, Eigen::VectorXd::Zero(2),
                               Eigen::VectorXd::Ones(2), 500, 50, 1);
  EXPECT_EQ(chain.accepted_count, 500);
  EXPECT_EQ(chain.proposed_count, 500);
  EXPECT_EQ(chain.samples.size(), 500u);
  EXPECT_EQ(chain.retained_size(), 450u);
}

TEST(MhSample, StandardNormalMoments) {
  const auto chain = mh_sample([](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); },
                               Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 2.4), 50000, 1000, 3);
  const double mean = chain.retained_mean()(0);
  const double var = chain.retained_variance()(0);
  EXPECT_LT(std::abs(mean), 0.05);
  EXPECT_GT(var, 0.9);
  EXPECT_LT(var, 1.1);
  const double rate = chain.acceptance_rate();
  EXPECT_GT(rate, 0.05);
  EXPECT_LT(rate, 0.6);
}

TEST(MhSample, CorrelatedGaussianMoments) {
  Eigen::Matrix2d cov;
  cov << 1.0, 0.6, 0.6, 2.0;
  const Eigen::Matrix2d prec = cov.inverse();
  const auto chain = mh_sample([&](const Eigen::VectorXd& x) { return -0.5 * x.dot(prec * x); },
                               Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(2, 1.0), 40000, 2000, 4);
  const Eigen::VectorXd var = chain.retained_variance();
  EXPECT_NEAR(var(0), 1.0, 0.05);
  EXPECT_NEAR(var(1), 2.0, 0.1);
  EXPECT_LT(chain.retained_mean().norm(), 0.1);
}

TEST(MhSample, ReproducibleForSeed) {
  auto target = [](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); };
  const auto a = mh_sample(target, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2), 300, 30, 9);
  const auto b = mh_sample(target, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2), 300, 30, 9);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_EQ(a.samples[i], b.samples[i]);
  EXPECT_EQ(a.proposed_count, b.proposed_count);
}

TEST(MhSample, SamplesRespectSupport) {
  auto target = [](const Eigen::VectorXd& x) {
    return x(0) > 0.0 ? -x(0) : -std::numeric_limits<double>::infinity();
  };
  const auto chain = mh_sample(target, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1), 2000, 100, 5);
  for (const auto& s : chain.samples) EXPECT_GT(s(0), 0.0);
}

TEST(MhSample, ArgumentChecks) {
  auto target = [](const Eigen::VectorXd& x) { return -x.squaredNorm(); };
  EXPECT_THROW(mh_sample(target, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(1), 10, 1, 1), InvalidArgument);
  EXPECT_THROW(mh_sample(target, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), 10, 10, 1), InvalidArgument);
  auto outside = [](const Eigen::VectorXd&) { return -std::numeric_limits<double>::infinity(); };
  EXPECT_THROW(mh_sample(outside, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), 10, 1, 1), InvalidArgument);
}

TEST(MhSample, AbortsOnHopelessAcceptance) {
  auto spike = [](const Eigen::VectorXd& x) { return -1e12 * x.squaredNorm(); };
  MhOptions opts;
  opts.adapt = false;
  opts.abort_after = 2000;
  EXPECT_THROW(mh_sample(spike, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), 100, 10, 1, opts), NumericalError);
}

TEST(MapEstimate, IdenticalSamples) {
  ParameterChain c;
  c.samples.assign(5, Eigen::Vector2d(1.0, 2.0));
  c.log_posteriors.assign(5, -3.0);
  c.accepted_at = {1, 2, 3, 4, 5};
  EXPECT_EQ(map_estimate(c), Eigen::Vector2d(1.0, 2.0));
}

TEST(MapEstimate, PicksMaximumAfterBurnIn) {
  ParameterChain c;
  const std::vector<double> lp = {10.0, -5.0, -1.0, -7.0, -2.0};
  for (std::size_t i = 0; i < lp.size(); ++i) {
    c.samples.push_back(Eigen::VectorXd::Constant(1, static_cast<double>(i)));
    c.log_posteriors.push_back(lp[i]);
    c.accepted_at.push_back(static_cast<long>(i + 1));
  }
  c.burn_in = 1;  // the 10.0 sample is burn-in and must be ignored
  EXPECT_EQ(map_estimate(c)(0), 2.0);
  c.burn_in = 5;
  EXPECT_THROW(map_estimate(c), NumericalError);
}

TEST(ParameterChain, HoldingTimesWeightMoments) {
  ParameterChain c;
  c.samples = {Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 4.0)};
  c.log_posteriors = {0.0, 0.0};
  c.accepted_at = {1, 4};  // first state held for 3 iterations, second for 1
  c.proposed_count = 4;
  c.accepted_count = 2;
  EXPECT_EQ(c.holding_times(), Eigen::Vector2d(3.0, 1.0));
  EXPECT_DOUBLE_EQ(c.retained_mean()(0), 1.0);
}

TEST(ParameterChain, CsvLayout) {
  const auto chain = mh_sample([](const Eigen::VectorXd& x) { return -x.squaredNorm(); }, Eigen::VectorXd::Zero(2),
                               Eigen::VectorXd::Ones(2), 20, 5, 1, {}, {"a", "b"});
  std::ostringstream os;
  chain.write_csv(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "a,b,log_posterior,accepted_at");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 15);
}

TEST(PerturbPriors, IdentityAndUnitShift) {
  const auto base = silverbox_priors();
  const auto same = perturb_priors(base, std::array<double, kNumParams>{});
  for (std::size_t i = 0; i < kNumParams; ++i) EXPECT_DOUBLE_EQ(same.priors[i].mean, base.priors[i].mean);
  std::array<double, kNumParams> ones;
  ones.fill(1.0);
  const auto up = perturb_priors(base, ones);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    EXPECT_NEAR(up.priors[i].mean, base.priors[i].mean * std::numbers::e, 1e-12 * std::abs(up.priors[i].mean));
    EXPECT_DOUBLE_EQ(up.priors[i].variance, base.priors[i].variance);
  }
}

TEST(PerturbPriors, FixedParametersUntouchedAndSeeded) {
  const auto base = duffing_priors();
  const auto a = perturb_priors(base, 77);
  const auto b = perturb_priors(base, 77);
  EXPECT_DOUBLE_EQ(a[Param::Mass].mean, 1.0);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    EXPECT_DOUBLE_EQ(a.priors[i].mean, b.priors[i].mean);
    EXPECT_GT(a.priors[i].mean, 0.0);
  }
}

TEST(MaximizePositive, FindsLogNormalMode) {
  // Maximum of -(log x - log 3)^2 - (log y - log 0.2)^2 at (3, 0.2).
  auto target = [](const Eigen::VectorXd& x) {
    return -std::pow(std::log(x(0) / 3.0), 2) - std::pow(std::log(x(1) / 0.2), 2);
  };
  const Eigen::VectorXd best = maximize_positive(target, Eigen::Vector2d(1.0, 1.0));
  EXPECT_NEAR(best(0), 3.0, 1e-3);
  EXPECT_NEAR(best(1), 0.2, 1e-4);
}
